#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tobo/optimize.hpp"
#include "tobo/problem.hpp"
#include "tobo/ptogp.hpp"
#include "tobo/scalarization.hpp"
#include "tobo/togp.hpp"

namespace tobo {

/// L(mean) + beta * sqrt(lambda_max(cov)).
double ucb(const Scalarization& s, const Posterior& post, double beta);
/// Same criterion over the entries selected by lambda; `post` is already restricted.
double ucb_partial(const Scalarization& s, const PartialPosterior& post, const SelectionVector& lambda, double beta);

struct SearchConfig {
    /// Quasi-random starting points; 0 means 32 * d.
    std::size_t starts = 0;
    BoxSearchOptions local{};
};

struct AcquisitionMax {
    Eigen::VectorXd x;
    double value = 0.0;
    std::size_t start = 0;
};

using Acquisition = std::function<double(const Eigen::VectorXd&)>;

/// Multi-start maximization over the box. Every start is refined locally;
/// the best value wins, ties going to the lowest start index.
AcquisitionMax maximize_acquisition(const Acquisition& acq, const InputDomain& domain, const SearchConfig& cfg,
                                    std::uint64_t seed);

Eigen::VectorXd select_input(const TogpModel& model, const InputDomain& domain, const Scalarization& s, double beta,
                             const SearchConfig& cfg, std::uint64_t seed);

struct BetaSchedule {
    enum class Kind { Practical, Theoretical };
    /// Theoretical schedule as printed: sqrt(C_n) + 2d log(q), or with the
    /// square root the concentration argument produces: sqrt(C_n) + sqrt(2d log(q)),
    /// where q = r d n^2 (b sqrt(log(d a / delta)) + C_grad) / delta.
    enum class Form { Printed, Sqrt };

    Kind kind = Kind::Practical;
    double c0 = 1.0;
    double c1 = 2.0;
    double delta = 0.1;
    double r = 1.0;
    double a = 1.0;
    double b = 1.0;
    double c_grad = 1.0;
    Form form = Form::Printed;

    void validate() const;
    bool needs_cn() const noexcept { return kind == Kind::Theoretical; }
    /// n is the number of observations so far; values below 1 are treated as 1 by the theoretical form.
    double operator()(std::size_t n, std::size_t d, double c_n = 1.0) const;
};

/// sup_x tr(cov(x)) / lambda_max(cov(x)) over `points` quasi-random points of the box.
double estimate_cn(const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& cov_at, const InputDomain& domain,
                   std::size_t points = 256, std::uint64_t seed = 0);

/// 1/2 log det(I + K_N / eta) for the given design.
double information_gain(const TensorKernel& k, const Eigen::MatrixXd& X, double eta);

struct KernelSpec {
    TensorKernel::Kind kind = TensorKernel::Kind::Separable;
    BaseFamily family = BaseFamily::Matern52;
    CoreSpec core{};
};

/// Kernel with lengthscales `lengthscale_fraction` times the box widths and deterministic cores.
TensorKernel make_kernel(const KernelSpec& spec, const TensorShape& shape, const InputDomain& domain,
                         double lengthscale_fraction = 0.5);

struct SurrogateConfig {
    KernelSpec kernel{};
    FitOptions fit{};
    /// Re-estimate hyperparameters every this many rounds (1 = every round).
    std::size_t refit_every = 1;
    /// Use the per-entry sample mean of the observations as the prior mean.
    bool center_outputs = true;
    double initial_lengthscale_fraction = 0.5;
    /// Initial tau^2 as a fraction of the sample variance.
    double initial_noise_fraction = 1e-2;
    /// Lengthscale bounds as fractions of the box widths, and the tau^2 floor
    /// as a fraction of the sample variance. They override the matching FitOptions bounds.
    double min_lengthscale_fraction = 1e-2;
    double max_lengthscale_fraction = 1e2;
    double min_noise_fraction = 1e-6;
};

/// FitOptions of a surrogate config with bounds resolved against the box and the data variance.
FitOptions resolve_fit_options(const SurrogateConfig& cfg, const InputDomain& domain, double sample_variance);

/// Starting hyperparameters from the data: centering, sigma^2 matched to
/// the sample variance, tau^2 a fraction of it.
TogpHyper initial_hyper(const TensorKernel& kernel, const EntryLists& entries, const Eigen::VectorXd& Y,
                        const SurrogateConfig& cfg);

/// Settings shared by both optimization loops.
struct LoopConfig {
    std::size_t n0 = 0;
    std::size_t N = 0;
    std::uint64_t seed = 0;
    Scalarization scalarization{};
    BetaSchedule beta{};
    SearchConfig search{};
    SurrogateConfig surrogate{};
    /// Maximum of the noiseless scalarized objective; enables regret columns.
    std::optional<double> optimum;
    /// Stop after this many rounds; 0 means never. Used to exercise failure handling.
    std::size_t fail_after = 0;
};

using ToboConfig = LoopConfig;

struct RunRecord {
    std::size_t round = 0;  // 1-based over every observation, initial design included
    bool initial = false;
    Eigen::VectorXd x;
    SelectionVector selection;
    Eigen::VectorXd y;  // observed entries, ascending
    double scalarized = 0.0;
    double incumbent = 0.0;
    std::optional<double> regret;
    std::optional<double> cumulative_regret;
    double beta = 0.0;
    double rho = 0.0;
};

struct RunResult {
    std::vector<RunRecord> records;
    /// Index of the record with the best scalarized observation (first on ties).
    std::size_t best = 0;
    bool failed = false;
    std::string failure;
    std::optional<TogpHyper> hyper;  // last fitted hyperparameters
};

using RecordSink = std::function<void(const RunRecord&)>;

/// UCB-based tensor-output BO. Numerical failure stops the loop and returns
/// the records so far with `failed` set.
RunResult run_tobo(const TensorProblem& problem, const ToboConfig& cfg, const RecordSink& sink = {});

/// Seeds of the independent random streams of one run.
enum class Stream : std::uint64_t { Design = 1, Noise = 2, Search = 3, Arms = 4, Cn = 5, Problem = 6 };
std::uint64_t stream_seed(std::uint64_t seed, Stream s, std::uint64_t index = 0);

}  // namespace tobo
