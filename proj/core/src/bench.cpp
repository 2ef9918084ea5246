#include "tobo/bench.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "tobo/error.hpp"
#include "tobo/linalg.hpp"
#include "tobo/sampling.hpp"
#include "tobo/tocbbo.hpp"

namespace tobo {

void SyntheticSpec::validate() const {
    if (T.empty() || T.size() != P.size()) throw ConfigError("problem.T", "T and P need the same, nonzero number of modes");
    for (std::size_t l = 0; l < T.size(); ++l)
        if (T[l] == 0 || P[l] == 0) throw ConfigError("problem.T", "all dimensions must be positive");
    if (T.back() != 2) throw ConfigError("problem.T", "the last output mode must have size 2 (columns of g)");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("problem.noise_std", "must be >= 0");
}

SyntheticSpec synthetic_setting(int setting, std::uint64_t seed) {
    switch (setting) {
        case 1: return {{2, 4, 2}, {3, 3, 3}, 0.1, seed};
        case 2: return {{3, 2}, {3, 2}, 0.1, seed};
        case 3: return {{4, 5, 2}, {3, 3, 3}, 0.1, seed};
        default: throw ConfigError("problem.setting", "setting must be 1, 2 or 3");
    }
}

SyntheticProblem::SyntheticProblem(SyntheticSpec spec)
    : spec_((spec.validate(), std::move(spec))), shape_(spec_.T), domain_(InputDomain::unit_cube(spec_.d())),
      B_(TensorShape(spec_.P)) {
    std::mt19937_64 rng(spec_.seed);
    for (double& b : B_.data()) b = unit_uniform(rng);
    for (std::size_t l = 1; l < spec_.modes(); ++l) {
        Eigen::MatrixXd U(static_cast<Eigen::Index>(spec_.P[l - 1]), static_cast<Eigen::Index>(spec_.T[l - 1]));
        const double ll = static_cast<double>(l);
        for (Eigen::Index i = 0; i < U.rows(); ++i)
            for (Eigen::Index j = 0; j < U.cols(); ++j) {
                const double ii = static_cast<double>(i + 1), jj = static_cast<double>(j + 1);
                U(i, j) = ll * ii * std::cos(ii * jj * ll / 2.0) + std::sin(ll * ii);
            }
        U_.push_back(std::move(U));
    }
}

Eigen::MatrixXd SyntheticProblem::g(const Eigen::VectorXd& x) {
    Eigen::MatrixXd G(x.size(), 2);
    G.col(0) = (5.0 * x.array()).sin().matrix();
    G.col(1) = x.array().cos().matrix();
    return G;
}

Eigen::VectorXd SyntheticProblem::truth(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != spec_.d()) throw ShapeError("input has wrong dimension");
    DenseTensor t = B_;
    for (std::size_t l = 0; l < U_.size(); ++l) t = mode_product(t, l, U_[l].transpose());
    t = mode_product(t, spec_.modes() - 1, g(x).transpose());
    return vec(t);
}

SyntheticProblem make_synthetic(const SyntheticSpec& spec) { return SyntheticProblem(spec); }

namespace {

struct Candidate {
    double value;
    Eigen::VectorXd x;
};

// Keeps the `cap` best candidates, best first; earlier insertions win ties.
void keep_top(std::vector<Candidate>& top, std::size_t cap, double v, const Eigen::VectorXd& x) {
    if (top.size() == cap && !(v > top.back().value)) return;
    auto it = std::upper_bound(top.begin(), top.end(), v,
                               [](double val, const Candidate& c) { return val > c.value; });
    top.insert(it, Candidate{v, x});
    if (top.size() > cap) top.pop_back();
}

std::vector<std::vector<Eigen::Index>> all_subsets(std::size_t T, std::size_t k) {
    std::vector<std::vector<Eigen::Index>> out;
    std::vector<Eigen::Index> idx(k);
    for (std::size_t j = 0; j < k; ++j) idx[j] = static_cast<Eigen::Index>(j);
    for (;;) {
        out.push_back(idx);
        std::size_t j = k;
        while (j > 0 && idx[j - 1] == static_cast<Eigen::Index>(T - k + j - 1)) --j;
        if (j == 0) break;
        ++idx[j - 1];
        for (std::size_t q = j; q < k; ++q) idx[q] = idx[q - 1] + 1;
    }
    return out;
}

Optimum search(const TensorProblem& problem, const Scalarization& s, std::size_t k, bool cbbo,
               const OracleOptions& opts) {
    const InputDomain& box = problem.domain();
    const std::size_t d = box.dim();
    const std::size_t T = problem.output_size();
    if (cbbo && binomial(T, k) > kExactSuperarmLimit)
        throw std::invalid_argument("oracle super-arm enumeration exceeds the subset guard");

    std::vector<std::vector<Eigen::Index>> arms;
    if (cbbo) {
        arms = all_subsets(T, k);
    } else {
        arms.emplace_back(T);
        for (std::size_t i = 0; i < T; ++i) arms[0][i] = static_cast<Eigen::Index>(i);
    }
    const bool grid = d <= opts.max_grid_dim;
    const std::size_t cap = grid ? 1 : (cbbo ? std::min<std::size_t>(opts.starts, 32) : opts.starts);
    std::vector<std::vector<Candidate>> top(arms.size());
    auto visit = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd f = problem.truth(x);
        for (std::size_t a = 0; a < arms.size(); ++a)
            keep_top(top[a], cap, s.partial(f(arms[a]), arms[a]), x);
    };

    if (grid) {
        const std::size_t g = std::max<std::size_t>(opts.grid, 2);
        std::size_t total = 1;
        for (std::size_t j = 0; j < d; ++j) total *= g;
        Eigen::VectorXd x(static_cast<Eigen::Index>(d));
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::size_t r = idx;
            for (Eigen::Index j = 0; j < x.size(); ++j) {
                const double u = static_cast<double>(r % g) / static_cast<double>(g - 1);
                r /= g;
                x(j) = box.lower(j) + u * (box.upper(j) - box.lower(j));
            }
            visit(x);
        }
    } else {
        const Eigen::MatrixXd P = halton_points(opts.starts, box, opts.seed);
        for (Eigen::Index i = 0; i < P.rows(); ++i) visit(P.row(i).transpose());
    }

    // Polish the most promising super-arms with the selection held fixed.
    std::vector<std::size_t> order(arms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return top[a].front().value > top[b].front().value; });
    order.resize(std::min(order.size(), std::max<std::size_t>(opts.polished_arms, 1)));

    std::vector<Candidate> best_per_arm;
    for (std::size_t a : order) {
        const auto& idx = arms[a];
        auto fa = [&](const Eigen::VectorXd& x) { return s.partial(problem.truth(x)(idx), idx); };
        Candidate best = top[a].front();
        if (opts.polish || !grid)
            for (const auto& c : top[a]) {
                const BoxSearchResult r = maximize_in_box(fa, box, c.x, opts.local);
                if (r.value > best.value) best = {r.value, r.x};
            }
        best_per_arm.push_back(std::move(best));
    }

    std::size_t win = 0;
    for (std::size_t i = 1; i < best_per_arm.size(); ++i)
        if (best_per_arm[i].value > best_per_arm[win].value) win = i;
    Optimum out;
    out.x = best_per_arm[win].x;
    out.value = best_per_arm[win].value;
    if (!cbbo) return out;
    out.lambda = SelectionVector::from_indices(T, arms[order[win]]);
    const double tol = opts.tie_tolerance * std::max(1.0, std::abs(out.value));
    for (std::size_t i = 0; i < best_per_arm.size(); ++i)
        if (best_per_arm[i].value >= out.value - tol)
            out.ties.push_back({best_per_arm[i].x, SelectionVector::from_indices(T, arms[order[i]]), best_per_arm[i].value});
    return out;
}

}  // namespace

Optimum true_optimum(const TensorProblem& problem, const Scalarization& s, const OracleOptions& opts) {
    return search(problem, s, 0, false, opts);
}

Optimum true_optimum_cbbo(const TensorProblem& problem, const Scalarization& s, std::size_t k,
                          const OracleOptions& opts) {
    if (k < 1 || k > problem.output_size()) throw ShapeError("super-arm size k must lie in [1, T]");
    return search(problem, s, k, true, opts);
}

MetricReport surrogate_metrics(const TogpModel& model, const Dataset& test) {
    const auto T = static_cast<Eigen::Index>(model.hyper().kernel.output_size());
    test.validate(static_cast<std::size_t>(T));
    MetricReport m;
    m.nll = -model.log_marginal_likelihood();
    std::vector<Eigen::VectorXd> truth, pred;
    double cov = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const Posterior p = model.posterior(test.X.row(static_cast<Eigen::Index>(i)).transpose());
        truth.push_back(test.Y.segment(static_cast<Eigen::Index>(i) * T, T));
        pred.push_back(p.mean);
        cov = std::max(cov, spectral_norm_psd(p.cov));
    }
    m.mae = mean_relative_error(truth, pred, &m.excluded);
    m.cov_norm = cov;
    return m;
}

double mse_x(const Eigen::VectorXd& x_star, const Eigen::VectorXd& x) {
    if (x_star.size() != x.size()) throw ShapeError("mse_x needs inputs of equal dimension");
    return (x_star - x).squaredNorm();
}

double mae_y(const Eigen::VectorXd& f_star, const Eigen::VectorXd& f, std::size_t* excluded) {
    if (f_star.size() != f.size()) throw ShapeError("mae_y needs outputs of equal length");
    double s = 0.0;
    std::size_t skipped = 0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        if (std::abs(f_star(i)) < 1e-12) {
            ++skipped;
            continue;
        }
        const double r = (f_star(i) - f(i)) / f_star(i);
        s += r * r;
    }
    if (excluded) *excluded = skipped;
    return std::sqrt(s);
}

MetricReport optimization_metrics(const TensorProblem& problem, const RunResult& run, const Optimum& opt) {
    MetricReport m;
    if (run.records.empty()) return m;
    const RunRecord& best = run.records[run.best];
    Eigen::VectorXd x_star = opt.x;
    std::optional<SelectionVector> lam_star = opt.lambda;
    if (opt.lambda) {
        double best_acc = -1.0, best_mse = 0.0;
        for (const auto& t : opt.ties) {
            const double acc = superarm_accuracy(best.selection, t.lambda);
            const double mse = mse_x(t.x, best.x);
            if (acc > best_acc || (acc == best_acc && mse < best_mse)) {
                best_acc = acc;
                best_mse = mse;
                x_star = t.x;
                lam_star = t.lambda;
            }
        }
    }
    m.mse_x = mse_x(x_star, best.x);
    Eigen::VectorXd f_star = problem.truth(x_star);
    Eigen::VectorXd f = problem.truth(best.x);
    if (lam_star) {
        f_star = Eigen::VectorXd(f_star(lam_star->indices()));
        f = Eigen::VectorXd(f(best.selection.indices()));
        m.acc = superarm_accuracy(best.selection, *lam_star);
    }
    m.mae_y = mae_y(f_star, f, &m.excluded);
    if (run.records.back().regret) m.final_regret = *run.records.back().regret;
    return m;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == '\t' || c == ' ' || c == ';' || c == '\r') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& v) {
    std::istringstream is(s);
    is >> v;
    return !is.fail() && is.eof();
}

}  // namespace

Dataset load_table(const std::string& path, std::size_t d, std::size_t T) {
    std::ifstream in(path);
    if (!in) throw ConfigError("problem.path", "cannot open dataset '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto fields = split_fields(line);
        if (fields.empty()) continue;
        std::vector<double> row;
        bool numeric = true;
        for (const auto& f : fields) {
            double v = 0.0;
            if (!parse_double(f, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw ConfigError("problem.path", path + ":" + std::to_string(lineno) + ": non-numeric field");
        }
        first = false;
        if (row.size() != d + T)
            throw ConfigError("problem.path", path + ":" + std::to_string(lineno) + ": expected " +
                                                  std::to_string(d + T) + " columns, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    out.Y.resize(static_cast<Eigen::Index>(rows.size() * T));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        for (std::size_t t = 0; t < T; ++t) out.Y(static_cast<Eigen::Index>(i * T + t)) = rows[i][d + t];
    }
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::size_t output_size, double test_fraction,
                                          std::uint64_t seed) {
    const auto T = static_cast<Eigen::Index>(output_size);
    data.validate(output_size);
    const std::size_t n = data.size();
    if (n < 2) throw std::invalid_argument("a train/test split needs at least two rows");
    auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng() % i)]);
    auto take = [&](std::size_t from, std::size_t count) {
        Dataset out;
        out.X.resize(static_cast<Eigen::Index>(count), data.X.cols());
        out.Y.resize(static_cast<Eigen::Index>(count) * T);
        for (std::size_t i = 0; i < count; ++i) {
            const auto src = static_cast<Eigen::Index>(perm[from + i]);
            out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(src);
            out.Y.segment(static_cast<Eigen::Index>(i) * T, T) = data.Y.segment(src * T, T);
        }
        return out;
    };
    return {take(0, n - n_test), take(n - n_test, n_test)};
}

}  // namespace tobo
