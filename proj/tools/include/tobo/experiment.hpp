#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tobo/bench.hpp"
#include "tobo/problem.hpp"
#include "tobo/tobo.hpp"
#include "tobo/tocbbo.hpp"
#include "tobo/togp.hpp"

namespace tobo::experiment {

inline constexpr int kConfigSchemaVersion = 1;

enum class Task { BO, CBBO, Fit };

std::string to_string(Task t);

struct ProblemConfig {
    enum class Type { Synthetic, Dataset };
    Type type = Type::Synthetic;

    // synthetic
    std::optional<int> setting;
    std::vector<std::size_t> T;
    std::vector<std::size_t> P;
    double noise_std = 0.1;
    /// Seed of the coefficient tensor B; unset means each run uses its own seed.
    std::optional<std::uint64_t> seed;

    // dataset
    std::string path;
    std::size_t d = 0;
    std::vector<std::size_t> shape;
    double test_fraction = 0.2;

    std::size_t input_dim() const;
    TensorShape output_shape() const;
};

struct FitTaskConfig {
    /// Synthetic problems only: sizes of the generated train and test designs.
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

/// Fully resolved experiment configuration; every default is materialized.
struct ExperimentConfig {
    Task task = Task::BO;
    ProblemConfig problem;
    SurrogateConfig surrogate;
    std::vector<CoreSpec> rank_candidates;
    SolverKind solver = SolverKind::Dense;
    Scalarization scalarization;
    BetaSchedule beta;
    double rho_delta = 0.1;
    std::size_t n0 = 0;
    std::size_t N = 0;
    std::size_t k = 1;
    /// Fault injection: abort with a numerical failure after this many BO rounds (0 = never).
    std::size_t fail_after = 0;
    SuperarmMode superarm_mode = SuperarmMode::Greedy;
    SearchConfig search;
    OracleOptions oracle;
    FitTaskConfig fit;
    std::vector<std::uint64_t> seeds;
    std::string output_dir = "results";
};

/// Validates and resolves a config document. Unknown keys, wrong types and
/// violated invariants throw ConfigError naming the field path.
ExperimentConfig parse_config(const nlohmann::json& j);

/// Reads and parses a config file; syntax errors report line and column.
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Relative directories resolve against $TOBO_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output_dir(const std::string& dir);

std::unique_ptr<TensorProblem> make_problem(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunOptions {
    std::optional<std::string> output_dir;
    std::optional<SuperarmMode> superarm_mode;
    /// Seeds executed concurrently.
    std::size_t jobs = 1;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure;
};

/// Executes every seed, writes per-seed artifacts and the summary.
/// Returns one outcome per seed in config order.
std::vector<SeedOutcome> run(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Runs a single seed into `dir`.
SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir);

struct Summary {
    nlohmann::json document;
    /// (round, median log10 regret, seeds contributing)
    std::vector<std::tuple<std::size_t, double, std::size_t>> regret_curve;
};

/// Aggregates records_seed*.csv and metrics_seed*.json files. Directories
/// are expanded to the per-seed files they contain. Throws ConfigError when
/// the record files disagree on their header.
Summary summarize(const std::vector<std::filesystem::path>& inputs);

void write_summary(const Summary& s, const std::filesystem::path& dir);

/// Type-7 sample quantile of unsorted values.
double quantile(std::vector<double> values, double q);

std::string format_double(double v);

}  // namespace tobo::experiment
