#include "tobo/tocbbo.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "tobo/error.hpp"
#include "tobo/linalg.hpp"

namespace tobo {

void RhoSchedule::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("rho.delta", "must lie in (0, 1)");
}

double RhoSchedule::pi_n(std::size_t n) {
    const double nn = static_cast<double>(n);
    return std::numbers::pi * std::numbers::pi * nn * nn / 6.0;
}

double RhoSchedule::operator()(std::size_t n, std::size_t T) const {
    const double N = static_cast<double>(std::max<std::size_t>(horizon, 1));
    const double arg = N * static_cast<double>(T) * pi_n(std::max<std::size_t>(n, 1)) / delta;
    return std::sqrt(2.0 * std::log(arg));
}

std::string to_string(SuperarmMode m) { return m == SuperarmMode::Exact ? "exact" : "greedy"; }

SuperarmMode superarm_mode_from_string(const std::string& s) {
    if (s == "exact") return SuperarmMode::Exact;
    if (s == "greedy") return SuperarmMode::Greedy;
    throw ConfigError("superarm_mode", "unknown super-arm mode '" + s + "' (greedy, exact)");
}

double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(c);
}

double superarm_objective(const Posterior& latent, const std::vector<Eigen::Index>& entries, const Scalarization& s,
                          double rho) {
    const double mean = s.partial(latent.mean(entries), entries);
    if (rho == 0.0) return mean;
    return mean + rho * std::sqrt(spectral_norm_psd(latent.cov(entries, entries)));
}

SuperarmChoice select_superarm(const Posterior& latent, std::size_t k, const Scalarization& s, double rho,
                               SuperarmMode mode) {
    const auto T = static_cast<std::size_t>(latent.mean.size());
    if (k < 1 || k > T) throw ShapeError("super-arm size k must lie in [1, T]");
    SuperarmChoice best;
    best.value = -std::numeric_limits<double>::infinity();

    if (mode == SuperarmMode::Exact) {
        if (binomial(T, k) > kExactSuperarmLimit)
            throw std::invalid_argument("exact super-arm search would enumerate C(" + std::to_string(T) + ", " +
                                        std::to_string(k) + ") subsets; use greedy mode");
        std::vector<Eigen::Index> idx(k);
        for (std::size_t j = 0; j < k; ++j) idx[j] = static_cast<Eigen::Index>(j);
        std::vector<Eigen::Index> arg;
        for (;;) {
            const double v = superarm_objective(latent, idx, s, rho);
            if (arg.empty() || v > best.value) {
                best.value = v;
                arg = idx;
            }
            // Next combination in lexicographic order.
            std::size_t j = k;
            while (j > 0 && idx[j - 1] == static_cast<Eigen::Index>(T - k + j - 1)) --j;
            if (j == 0) break;
            ++idx[j - 1];
            for (std::size_t q = j; q < k; ++q) idx[q] = idx[q - 1] + 1;
        }
        best.lambda = SelectionVector::from_indices(T, arg);
        return best;
    }

    std::vector<std::uint8_t> chosen(T, 0);
    std::vector<Eigen::Index> current;
    for (std::size_t step = 0; step < k; ++step) {
        double step_best = -std::numeric_limits<double>::infinity();
        Eigen::Index arm = -1;
        for (std::size_t a = 0; a < T; ++a) {
            if (chosen[a]) continue;
            std::vector<Eigen::Index> trial = current;
            trial.insert(std::upper_bound(trial.begin(), trial.end(), static_cast<Eigen::Index>(a)),
                         static_cast<Eigen::Index>(a));
            const double v = superarm_objective(latent, trial, s, rho);
            if (arm < 0 || v > step_best) {
                step_best = v;
                arm = static_cast<Eigen::Index>(a);
            }
        }
        chosen[static_cast<std::size_t>(arm)] = 1;
        current.insert(std::upper_bound(current.begin(), current.end(), arm), arm);
        best.value = step_best;
    }
    best.lambda = SelectionVector(std::move(chosen), k);
    return best;
}

SuperarmChoice select_superarm(const PtogpModel& model, const Eigen::VectorXd& x, std::size_t k, const Scalarization& s,
                               double rho, SuperarmMode mode) {
    return select_superarm(model.latent(x), k, s, rho, mode);
}

Eigen::VectorXd select_input_cbbo(const PtogpModel& model, const InputDomain& domain, const Scalarization& s,
                                  double beta, const SelectionVector& incumbent, const SearchConfig& cfg,
                                  std::uint64_t seed) {
    auto acq = [&](const Eigen::VectorXd& x) {
        return ucb_partial(s, model.partial_posterior(x, incumbent), incumbent, beta);
    };
    return maximize_acquisition(acq, domain, cfg, seed).x;
}

double superarm_accuracy(const SelectionVector& chosen, const SelectionVector& truth) {
    if (chosen.size() != truth.size() || chosen.k() != truth.k())
        throw ShapeError("super-arm accuracy needs selections of equal length and k");
    std::size_t overlap = 0;
    for (std::size_t i = 0; i < chosen.size(); ++i) overlap += (chosen[i] && truth[i]) ? 1 : 0;
    return static_cast<double>(overlap) / static_cast<double>(chosen.k());
}

}  // namespace tobo
