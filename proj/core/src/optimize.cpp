#include "tobo/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace tobo {

namespace {

// Two-loop recursion: returns H * g for the inverse-Hessian approximation
// implied by the (s, y) pairs.
Eigen::VectorXd two_loop(const std::deque<Eigen::VectorXd>& S, const std::deque<Eigen::VectorXd>& Y,
                         const Eigen::VectorXd& g) {
    Eigen::VectorXd q = g;
    const std::size_t m = S.size();
    std::vector<double> alpha(m), rho(m);
    for (std::size_t i = m; i-- > 0;) {
        rho[i] = 1.0 / Y[i].dot(S[i]);
        alpha[i] = rho[i] * S[i].dot(q);
        q -= alpha[i] * Y[i];
    }
    if (m > 0) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
        const double beta = rho[i] * Y[i].dot(q);
        q += (alpha[i] - beta) * S[i];
    }
    return q;
}

void push_pair(std::deque<Eigen::VectorXd>& S, std::deque<Eigen::VectorXd>& Y, Eigen::VectorXd s,
               Eigen::VectorXd y, int history) {
    const double sy = s.dot(y);
    if (!(sy > 1e-12 * s.norm() * y.norm()) || !std::isfinite(sy)) return;
    S.push_back(std::move(s));
    Y.push_back(std::move(y));
    while (static_cast<int>(S.size()) > history) {
        S.pop_front();
        Y.pop_front();
    }
}

}  // namespace

LbfgsResult minimize_lbfgs(const GradientObjective& f, Eigen::VectorXd x0, const LbfgsOptions& opts,
                           const Projection& project) {
    LbfgsResult res;
    Eigen::VectorXd x = std::move(x0);
    if (project) project(x);
    Eigen::VectorXd g(x.size());
    double fx = f(x, &g);
    res.x = x;
    res.value = fx;
    if (!std::isfinite(fx) || !g.allFinite()) {
        res.status = "non-finite objective at the initial point";
        return res;
    }
    res.trace.push_back(fx);

    std::deque<Eigen::VectorXd> S, Y;
    Eigen::VectorXd gn(x.size());
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        if (g.norm() < opts.gradient_tolerance) {
            res.converged = true;
            res.status = "gradient tolerance reached";
            break;
        }
        Eigen::VectorXd d = -two_loop(S, Y, g);
        if (!(d.dot(g) < 0.0) || !d.allFinite()) {
            S.clear();
            Y.clear();
            d = -g;
        }
        double t = S.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
        const double slope = g.dot(d);
        bool accepted = false;
        Eigen::VectorXd xn;
        double fn = 0.0;
        for (int ls = 0; ls < opts.max_line_search; ++ls) {
            xn = x + t * d;
            fn = f(xn, &gn);
            if (std::isfinite(fn) && gn.allFinite() && fn <= fx + 1e-4 * t * slope && fn < fx) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (!S.empty()) {
                S.clear();
                Y.clear();
                continue;
            }
            res.status = "line search failed to find a decrease";
            break;
        }
        if (project) {
            Eigen::VectorXd xp = xn;
            project(xp);
            Eigen::VectorXd gp(x.size());
            const double fp = f(xp, &gp);
            if (std::isfinite(fp) && gp.allFinite() && fp < fx) {
                xn = std::move(xp);
                fn = fp;
                gn = std::move(gp);
            }
        }
        push_pair(S, Y, xn - x, gn - g, opts.history);
        const double rel = (fx - fn) / std::max({std::abs(fx), std::abs(fn), 1.0});
        x = xn;
        fx = fn;
        g = gn;
        res.trace.push_back(fx);
        if (rel < opts.relative_tolerance) {
            res.converged = true;
            res.status = "relative tolerance reached";
            ++it;
            break;
        }
    }
    if (res.status.empty()) res.status = "maximum iterations reached";
    res.iterations = it;
    res.x = std::move(x);
    res.value = fx;
    return res;
}

Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double fx, const InputDomain& box, double h,
                                           int* evaluations) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double up = std::min(x(i) + h, box.upper(i));
        const double dn = std::max(x(i) - h, box.lower(i));
        double fu = fx, fd = fx;
        if (up > x(i)) {
            xp(i) = up;
            fu = f(xp);
            if (evaluations) ++*evaluations;
        }
        if (dn < x(i)) {
            xp(i) = dn;
            fd = f(xp);
            if (evaluations) ++*evaluations;
        }
        xp(i) = x(i);
        g(i) = (up > dn) ? (fu - fd) / (up - dn) : 0.0;
    }
    return g;
}

BoxSearchResult maximize_in_box(const std::function<double(const Eigen::VectorXd&)>& f, const InputDomain& box,
                                const Eigen::VectorXd& x0, const BoxSearchOptions& opts) {
    BoxSearchResult res;
    Eigen::VectorXd x = box.clamp(x0);
    double fx = f(x);
    res.evaluations = 1;
    Eigen::VectorXd g = finite_difference_gradient(f, x, fx, box, opts.fd_step, &res.evaluations);
    const double min_range = (box.upper - box.lower).minCoeff();

    // Curvature pairs of -f so that the usual BFGS update applies.
    std::deque<Eigen::VectorXd> S, Y;
    auto free_mask = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& gv) {
        Eigen::VectorXd m = Eigen::VectorXd::Ones(xv.size());
        for (Eigen::Index i = 0; i < xv.size(); ++i)
            if ((xv(i) <= box.lower(i) && gv(i) < 0.0) || (xv(i) >= box.upper(i) && gv(i) > 0.0)) m(i) = 0.0;
        return m;
    };

    for (int it = 0; it < opts.max_iterations; ++it) {
        const Eigen::VectorXd mask = free_mask(x, g);
        const Eigen::VectorXd gp = g.cwiseProduct(mask);
        if (gp.lpNorm<Eigen::Infinity>() == 0.0) break;
        Eigen::VectorXd d = two_loop(S, Y, gp).cwiseProduct(mask);
        if (!(d.dot(gp) > 0.0) || !d.allFinite()) {
            S.clear();
            Y.clear();
            d = gp;
        }
        double t = S.empty() ? 0.25 * min_range / d.lpNorm<Eigen::Infinity>() : 1.0;
        bool accepted = false;
        bool stalled = false;
        Eigen::VectorXd xn, step;
        double fn = fx;
        for (int ls = 0; ls < 30; ++ls) {
            xn = box.clamp(x + t * d);
            step = xn - x;
            if (step.norm() < opts.step_tolerance) {
                stalled = true;
                break;
            }
            fn = f(xn);
            ++res.evaluations;
            if (fn > fx && fn >= fx + 1e-4 * std::max(g.dot(step), 0.0)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (!S.empty() && !stalled) {
                S.clear();
                Y.clear();
                continue;
            }
            break;
        }
        const Eigen::VectorXd gn = finite_difference_gradient(f, xn, fn, box, opts.fd_step, &res.evaluations);
        push_pair(S, Y, step, -(gn - g), opts.history);
        x = xn;
        fx = fn;
        g = gn;
        if (step.norm() < opts.step_tolerance) break;
    }
    res.x = x;
    res.value = fx;
    return res;
}

}  // namespace tobo
