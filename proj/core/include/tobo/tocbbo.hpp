#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "tobo/ptogp.hpp"
#include "tobo/scalarization.hpp"
#include "tobo/tobo.hpp"

namespace tobo {

/// rho_n = sqrt(2 log(N T pi_n / delta)) with pi_n = pi^2 n^2 / 6, so that sum 1/pi_n = 1.
struct RhoSchedule {
    double delta = 0.1;
    std::size_t horizon = 1;  // N

    void validate() const;
    static double pi_n(std::size_t n);
    double operator()(std::size_t n, std::size_t T) const;
};

enum class SuperarmMode { Greedy, Exact };

std::string to_string(SuperarmMode m);
SuperarmMode superarm_mode_from_string(const std::string& s);

/// Largest number of subsets exact mode will enumerate.
inline constexpr double kExactSuperarmLimit = 1e6;

double binomial(std::size_t n, std::size_t k);

/// H(e(lambda) mean) + rho * sqrt(lambda_max(e(lambda) cov e(lambda)^T)) from the latent posterior at x.
double superarm_objective(const Posterior& latent, const std::vector<Eigen::Index>& entries, const Scalarization& s,
                          double rho);

struct SuperarmChoice {
    SelectionVector lambda;
    double value = 0.0;
};

/// Best super-arm of size k at a fixed input, from the latent posterior there.
/// Exact mode enumerates every subset (lexicographically first on ties) and
/// throws std::invalid_argument beyond kExactSuperarmLimit subsets. Greedy mode
/// grows the subset one arm at a time by the full objective, ties to the lowest index.
SuperarmChoice select_superarm(const Posterior& latent, std::size_t k, const Scalarization& s, double rho,
                               SuperarmMode mode);

SuperarmChoice select_superarm(const PtogpModel& model, const Eigen::VectorXd& x, std::size_t k, const Scalarization& s,
                               double rho, SuperarmMode mode);

/// Input maximizing the UCB of the entries selected by the incumbent super-arm.
Eigen::VectorXd select_input_cbbo(const PtogpModel& model, const InputDomain& domain, const Scalarization& s,
                                  double beta, const SelectionVector& incumbent, const SearchConfig& cfg,
                                  std::uint64_t seed);

struct TocbboConfig {
    LoopConfig loop{};
    std::size_t k = 1;
    RhoSchedule rho{};
    SuperarmMode mode = SuperarmMode::Greedy;
};

/// CMAB-UCB2 tensor-output combinatorial bandit BO.
RunResult run_tocbbo(const TensorProblem& problem, const TocbboConfig& cfg, const RecordSink& sink = {});

/// |selected ∩ optimal| / k.
double superarm_accuracy(const SelectionVector& chosen, const SelectionVector& truth);

}  // namespace tobo
