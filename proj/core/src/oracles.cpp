#include "tobo/oracles.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "tobo/error.hpp"

namespace tobo {

Posterior joint_conditioning_posterior(const TogpHyper& h, const Eigen::MatrixXd& X, const EntryLists& entries,
                                       const Eigen::VectorXd& Y, const Eigen::VectorXd& x) {
    const auto T = static_cast<Eigen::Index>(h.kernel.output_size());
    const Eigen::VectorXd mu = h.mean_vector();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> obs;  // (row, entry)
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (Eigen::Index e : entries[i]) obs.emplace_back(static_cast<Eigen::Index>(i), e);
    const auto M = static_cast<Eigen::Index>(obs.size());
    if (Y.size() != M) throw ShapeError("joint oracle: observation count mismatch");

    // Joint covariance over [vec f(x); observed scalars].
    const Eigen::Index D = T + M;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(D, D);
    auto point = [&](Eigen::Index a) -> Eigen::VectorXd { return a < T ? x : Eigen::VectorXd(X.row(obs[a - T].first).transpose()); };
    auto entry = [&](Eigen::Index a) { return a < T ? a : obs[a - T].second; };
    for (Eigen::Index a = 0; a < D; ++a)
        for (Eigen::Index b = 0; b < D; ++b) {
            const Eigen::MatrixXd K = h.kernel.eval(point(a), point(b));
            J(a, b) = h.signal_variance * K(entry(a), entry(b));
            if (a == b && a >= T) J(a, b) += h.noise_variance;
        }
    Eigen::VectorXd r(M);
    for (Eigen::Index a = 0; a < M; ++a) r(a) = Y(a) - mu(obs[a].second);

    const Eigen::MatrixXd Sff = J.topLeftCorner(T, T);
    const Eigen::MatrixXd Sfo = J.topRightCorner(T, M);
    const Eigen::MatrixXd Soo = J.bottomRightCorner(M, M);
    Posterior p;
    if (M == 0) {
        p.mean = mu;
        p.cov = Sff;
        return p;
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(Soo);
    p.mean = mu + Sfo * lu.solve(r);
    p.cov = Sff - Sfo * lu.solve(Eigen::MatrixXd(Sfo.transpose()));
    p.cov = 0.5 * (p.cov + p.cov.transpose()).eval();
    return p;
}

BruteForceSuperarm brute_force_superarm(const Posterior& latent, std::size_t k, const Scalarization& s, double rho) {
    const auto T = static_cast<std::size_t>(latent.mean.size());
    if (T > 24) throw std::invalid_argument("brute-force super-arm oracle supports T <= 24");
    if (k < 1 || k > T) throw ShapeError("super-arm size k must lie in [1, T]");
    BruteForceSuperarm out;
    out.value = -std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << T); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
        std::vector<Eigen::Index> idx;
        for (std::size_t t = 0; t < T; ++t)
            if (mask & (1u << t)) idx.push_back(static_cast<Eigen::Index>(t));
        const Eigen::VectorXd m = latent.mean(idx);
        double value = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const auto t = idx[j];
            switch (s.kind) {
                case Scalarization::Kind::Sum: value += m(static_cast<Eigen::Index>(j)); break;
                case Scalarization::Kind::WeightedSum: value += s.weights(t) * m(static_cast<Eigen::Index>(j)); break;
                case Scalarization::Kind::ExpWeighted:
                    value += std::exp(s.p * s.weights(t) - 1.0) * std::exp(s.p * m(static_cast<Eigen::Index>(j)));
                    break;
            }
        }
        if (rho != 0.0) {
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(latent.cov(idx, idx)),
                                                                    Eigen::EigenvaluesOnly);
            value += rho * std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
        }
        out.all.emplace_back(idx, value);
        if (value > out.value) {
            out.value = value;
            out.entries = idx;
        }
    }
    return out;
}

}  // namespace tobo
