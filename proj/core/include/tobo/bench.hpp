#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tobo/problem.hpp"
#include "tobo/ptogp.hpp"
#include "tobo/scalarization.hpp"
#include "tobo/tensor.hpp"
#include "tobo/tobo.hpp"
#include "tobo/togp.hpp"

namespace tobo {

/// f(x) = B x_1 U_1^T ... x_{m-1} U_{m-1}^T x_m g(x)^T on [0, 1]^d with
/// B ~ U(0, 1) entrywise, U_l(i, j) = l i cos(i j l / 2) + sin(l i) (1-based)
/// and g(x) = [sin(5x), cos(x)] in R^{d x 2}.
struct SyntheticSpec {
    std::vector<std::size_t> T;  // output dims, T.back() == 2
    std::vector<std::size_t> P;  // latent dims, P.back() == d
    double noise_std = 0.1;
    std::uint64_t seed = 0;

    std::size_t modes() const noexcept { return T.size(); }
    std::size_t d() const { return P.back(); }
    void validate() const;
};

/// The three benchmark settings: 1 -> T=(2,4,2), P=(3,3,3); 2 -> T=(3,2), P=(3,2); 3 -> T=(4,5,2), P=(3,3,3).
SyntheticSpec synthetic_setting(int setting, std::uint64_t seed = 0);

class SyntheticProblem final : public TensorProblem {
public:
    explicit SyntheticProblem(SyntheticSpec spec);

    const TensorShape& shape() const override { return shape_; }
    const InputDomain& domain() const override { return domain_; }
    double noise_std() const override { return spec_.noise_std; }
    Eigen::VectorXd truth(const Eigen::VectorXd& x) const override;

    const SyntheticSpec& spec() const noexcept { return spec_; }
    const DenseTensor& core() const noexcept { return B_; }
    /// U_l for l = 1..m-1, stored P_l x T_l (index l - 1).
    const Eigen::MatrixXd& factor(std::size_t l) const { return U_.at(l); }
    std::size_t num_factors() const noexcept { return U_.size(); }

    static Eigen::MatrixXd g(const Eigen::VectorXd& x);

private:
    SyntheticSpec spec_;
    TensorShape shape_;
    InputDomain domain_;
    DenseTensor B_;
    std::vector<Eigen::MatrixXd> U_;
};

SyntheticProblem make_synthetic(const SyntheticSpec& spec);

struct OracleOptions {
    /// Grid points per dimension when d <= max_grid_dim.
    std::size_t grid = 400;
    std::size_t max_grid_dim = 2;
    /// Multi-start local searches when d > max_grid_dim.
    std::size_t starts = 512;
    std::uint64_t seed = 0;
    bool polish = true;
    /// Super-arms whose optimum lies within tie_tolerance * max(1, |best|) count as co-optimal.
    double tie_tolerance = 1e-6;
    /// Super-arms polished individually, ranked by their best unpolished value.
    std::size_t polished_arms = 8;
    BoxSearchOptions local{.max_iterations = 100, .fd_step = 1e-6, .step_tolerance = 1e-10, .history = 5};
};

struct Optimum {
    Eigen::VectorXd x;
    double value = 0.0;
    std::optional<SelectionVector> lambda;  // CBBO only

    struct Alternative {
        Eigen::VectorXd x;
        SelectionVector lambda;
        double value = 0.0;
    };
    /// CBBO only: every super-arm whose best value ties the maximum within
    /// `tie_tolerance`, with its maximizer. Includes the primary optimum.
    std::vector<Alternative> ties;
};

/// Numerical maximizer of the noiseless scalarized objective: dense grid plus
/// local polish for small d, multi-start local search otherwise.
Optimum true_optimum(const TensorProblem& problem, const Scalarization& s, const OracleOptions& opts = {});

/// Maximizer over (x, lambda) with |lambda| = k; lambda is enumerated exactly at every x.
Optimum true_optimum_cbbo(const TensorProblem& problem, const Scalarization& s, std::size_t k,
                          const OracleOptions& opts = {});

struct MetricReport {
    std::optional<double> nll;
    std::optional<double> mae;
    std::optional<double> cov_norm;
    std::optional<double> mse_x;
    std::optional<double> mae_y;
    std::optional<double> acc;
    std::optional<double> final_regret;
    /// Entries skipped by relative errors because |truth| < 1e-12.
    std::size_t excluded = 0;
};

/// NLL on the training data (-log L under Sigma = sigma^2 K + tau^2 I), mean
/// relative error and largest posterior spectral norm over the test set.
MetricReport surrogate_metrics(const TogpModel& model, const Dataset& test);

/// ||x_star - x||^2
double mse_x(const Eigen::VectorXd& x_star, const Eigen::VectorXd& x);
/// ||(f_star - f) / f_star||, skipping |f_star| < 1e-12.
double mae_y(const Eigen::VectorXd& f_star, const Eigen::VectorXd& f, std::size_t* excluded = nullptr);

/// Metrics of the final recommendation (the best observed round) against the oracle optimum.
/// With co-optimal super-arms the recommendation is scored against the tie it
/// matches best (highest Acc, then smallest MSE_x).
MetricReport optimization_metrics(const TensorProblem& problem, const RunResult& run, const Optimum& opt);

/// Delimited text table: one row per observation, d input columns then T output columns.
/// Separators may be commas, tabs or spaces; '#' starts a comment; a non-numeric first row is a header.
Dataset load_table(const std::string& path, std::size_t d, std::size_t T);

/// Deterministic train/test split of a dataset.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::size_t output_size, double test_fraction,
                                          std::uint64_t seed);

}  // namespace tobo
