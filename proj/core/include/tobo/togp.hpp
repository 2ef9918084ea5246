#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tobo/kernels.hpp"
#include "tobo/linalg.hpp"
#include "tobo/optimize.hpp"

namespace tobo {

/// Hyperparameters of a tensor-output GP: vec(f) ~ GP(mu, sigma^2 K(x, x')),
/// observed with i.i.d. N(0, tau^2) noise on every entry.
struct TogpHyper {
    TensorKernel kernel;
    double signal_variance = 1.0;  // sigma^2
    double noise_variance = 1e-2;  // tau^2
    Eigen::VectorXd prior_mean;    // length T; empty means zero

    double eta() const { return noise_variance / signal_variance; }
    Eigen::VectorXd mean_vector() const;
    void validate() const;
};

/// Fully observed training data. Y stacks vec(y_1), ..., vec(y_n).
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd Y;

    std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
    void validate(std::size_t output_size) const;
};

struct Posterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// d log L with respect to tau^2, sigma^2 and every kernel parameter (raw scale).
struct HyperGradient {
    double noise_variance = 0.0;
    double signal_variance = 0.0;
    Eigen::VectorXd kernel;

    /// [tau^2, sigma^2, kernel...]
    Eigen::VectorXd flat() const;
};

/// Observed entries (ascending indices into vec(y)) for every observation row.
using EntryLists = std::vector<std::vector<Eigen::Index>>;

/// Conditions the latent vec(f) on noisy observations of selected entries.
///
/// With E the block-diagonal selection operator, the observation covariance
/// is Sigma = sigma^2 E K_n E^T + tau^2 I. Full observation (every entry of
/// every row) is the ordinary tensor-output GP. The factorization uses the
/// jitter ladder and throws NumericalError when it is exhausted.
class GpConditioner {
public:
    GpConditioner(TogpHyper hyper, Eigen::MatrixXd X, EntryLists entries, Eigen::VectorXd observations);

    /// Posterior of vec(f(x)) in R^T.
    Posterior latent(const Eigen::VectorXd& x) const;
    /// Posterior covariance of vec(f(x)) and vec(f(xp)).
    Eigen::MatrixXd latent_cross_cov(const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const;

    double log_marginal_likelihood() const;
    HyperGradient log_marginal_likelihood_gradient() const;

    const TogpHyper& hyper() const noexcept { return hyper_; }
    const Eigen::MatrixXd& inputs() const noexcept { return X_; }
    const EntryLists& entries() const noexcept { return entries_; }
    /// Total number of observed scalars.
    Eigen::Index observed_count() const noexcept { return residual_.size(); }
    double jitter() const noexcept { return chol_ ? chol_->jitter : 0.0; }

private:
    Eigen::MatrixXd observed_cross(const Eigen::VectorXd& x) const;

    TogpHyper hyper_;
    Eigen::MatrixXd X_;
    EntryLists entries_;
    std::vector<Eigen::Index> offsets_;
    Eigen::VectorXd residual_;
    Eigen::MatrixXd gram_;  // E K_n E^T
    std::optional<JitteredCholesky> chol_;
    Eigen::VectorXd alpha_;
};

enum class SolverKind { Dense, Kronecker };

/// Fitted tensor-output GP surrogate. Immutable; queries are thread-safe.
class TogpModel {
public:
    TogpModel(TogpHyper hyper, Dataset data, SolverKind solver = SolverKind::Dense);

    Posterior posterior(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd posterior_cross_cov(const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const;
    double log_marginal_likelihood() const;
    HyperGradient log_marginal_likelihood_gradient() const;

    const TogpHyper& hyper() const noexcept { return hyper_; }
    const Dataset& data() const noexcept { return data_; }
    SolverKind solver() const noexcept { return solver_; }

private:
    struct Kronecker;

    TogpHyper hyper_;
    Dataset data_;
    SolverKind solver_;
    std::optional<GpConditioner> dense_;
    std::shared_ptr<const Kronecker> kron_;
};

EntryLists full_entries(std::size_t n, std::size_t output_size);

Posterior posterior(const TogpHyper& h, const Dataset& data, const Eigen::VectorXd& x);
double log_marginal_likelihood(const TogpHyper& h, const Dataset& data);
HyperGradient grad_log_marginal_likelihood(const TogpHyper& h, const Dataset& data);

struct FitOptions {
    LbfgsOptions lbfgs{};
    /// Separable kernels only: keep ||vec(A)|| = 1, absorbing the scale into sigma^2.
    bool normalize_core = true;
    double min_lengthscale = 1e-6;
    double max_lengthscale = 1e6;
    /// Bounds for sigma^2 (and the upper bound for tau^2).
    double min_variance = 1e-10;
    double max_variance = 1e10;
    double min_noise_variance = 1e-10;
};

struct FitResult {
    TogpHyper hyper;
    double log_likelihood = 0.0;
    double initial_log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string status;
    std::vector<double> trace;  // log-likelihood per accepted iteration
};

/// Builds the conditioner for candidate hyperparameters (full or partial data).
using ConditionerFactory = std::function<GpConditioner(const TogpHyper&)>;

/// Maximum-likelihood fit by L-BFGS over log tau^2, log sigma^2, log lengthscales and raw core parameters.
FitResult fit_hyperparameters(const TogpHyper& init, const ConditionerFactory& make, const FitOptions& opts = {});

FitResult fit(const Dataset& data, const TogpHyper& init, const FitOptions& opts = {});

/// Hyperparameters in the optimizer's unconstrained coordinates and back.
Eigen::VectorXd to_search_space(const TogpHyper& h);
TogpHyper from_search_space(const TogpHyper& like, const Eigen::VectorXd& z);

struct RankSelectionOptions {
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
    /// MAE values within this relative margin of the best count as tied.
    double tie_tolerance = 0.02;
    FitOptions fit{};
};

struct RankCandidateResult {
    CoreSpec spec;
    double mae = 0.0;
    std::size_t param_count = 0;
    bool ok = false;
    std::string error;
};

struct RankSelection {
    CoreSpec best;
    std::vector<RankCandidateResult> candidates;
};

/// Replaces every core of `k` by a deterministic core with the given rank configuration.
TensorKernel with_core_spec(const TensorKernel& k, const CoreSpec& spec);

/// Cross-validated rank choice: fits each candidate on a holdout split and
/// keeps the lowest relative MAE, ties going to fewer core parameters.
RankSelection select_rank(const Dataset& data, const TogpHyper& init, std::span<const CoreSpec> candidates,
                          const RankSelectionOptions& opts = {});

/// (1/n) sum_i ||(truth_i - pred_i) / truth_i||, skipping entries with |truth| < 1e-12.
double mean_relative_error(std::span<const Eigen::VectorXd> truth, std::span<const Eigen::VectorXd> predicted,
                           std::size_t* excluded = nullptr);

struct NystromConfig {
    enum class Landmarks { Strided, Random };

    bool enabled = true;
    /// Explicit landmark count; 0 selects all nT columns.
    std::size_t landmarks = 0;
    /// Keep the smallest leading set of landmark eigenvalues explaining this fraction of their sum.
    double variance_threshold = 1.0;
    Landmarks sampling = Landmarks::Strided;
    std::uint64_t seed = 0;
};

struct NystromResult {
    Posterior posterior;
    std::size_t landmarks = 0;
    std::size_t rank = 0;
    bool clamped = false;
};

/// Posterior with (K_n + eta I)^{-1} replaced by the Woodbury inverse of the
/// Nystrom approximation of K_n built from landmark columns.
NystromResult nystrom_posterior(const TogpHyper& h, const Dataset& data, const Eigen::VectorXd& x,
                                const NystromConfig& cfg);

}  // namespace tobo
