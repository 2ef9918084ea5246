#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tobo/error.hpp"
#include "tobo/experiment.hpp"
#include "tobo/oracles.hpp"
#include "tobo/serialize.hpp"

namespace {

namespace fs = std::filesystem;
namespace ex = tobo::experiment;
using nlohmann::json;

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tobo::ConfigError(path, "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw tobo::ConfigError(path, e.what());
    }
}

tobo::Scalarization scalarization_from(const json& j) {
    tobo::Scalarization s;
    if (j.is_null()) return s;
    s.kind = tobo::scalarization_kind_from_string(j.value("kind", std::string("sum")));
    if (j.contains("weights")) s.weights = tobo::vector_from_json(j.at("weights"));
    s.p = j.value("p", 1.0);
    return s;
}

json choice_json(const std::vector<Eigen::Index>& idx, std::size_t T, double value) {
    return {{"lambda", tobo::SelectionVector::from_indices(T, idx).bitstring()}, {"value", value}};
}

int oracle_superarm(const std::string& input) {
    const json in = read_json(input);
    tobo::Posterior post{tobo::vector_from_json(in.at("mean")), tobo::matrix_from_json(in.at("cov"))};
    const auto T = static_cast<std::size_t>(post.mean.size());
    const auto k = in.at("k").get<std::size_t>();
    const double rho = in.value("rho", 0.0);
    const auto s = scalarization_from(in.value("scalarization", json()));
    s.validate(T);
    const auto brute = tobo::brute_force_superarm(post, k, s, rho);
    const auto exact = tobo::select_superarm(post, k, s, rho, tobo::SuperarmMode::Exact);
    const auto greedy = tobo::select_superarm(post, k, s, rho, tobo::SuperarmMode::Greedy);
    json out = {{"brute_force", choice_json(brute.entries, T, brute.value)},
                {"exact", {{"lambda", exact.lambda.bitstring()}, {"value", exact.value}}},
                {"greedy", {{"lambda", greedy.lambda.bitstring()}, {"value", greedy.value}}}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int oracle_joint(const std::string& input) {
    const json in = read_json(input);
    const json doc = in.at("surrogate").is_string() ? read_json(in.at("surrogate").get<std::string>()) : in.at("surrogate");
    const auto sur = tobo::surrogate_from_json(doc);
    const Eigen::VectorXd x = tobo::vector_from_json(in.at("x"));
    const auto ref = tobo::joint_conditioning_posterior(sur.hyper, sur.X, sur.entries, sur.Y, x);
    const tobo::GpConditioner fast(sur.hyper, sur.X, sur.entries, sur.Y);
    const auto p = fast.latent(x);
    const double diff = std::max((ref.mean - p.mean).cwiseAbs().maxCoeff(), (ref.cov - p.cov).cwiseAbs().maxCoeff());
    json out = {{"joint", {{"mean", tobo::vector_to_json(ref.mean)}, {"cov", tobo::matrix_to_json(ref.cov)}}},
                {"conditioner", {{"mean", tobo::vector_to_json(p.mean)}, {"cov", tobo::matrix_to_json(p.cov)}}},
                {"max_abs_diff", diff}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int oracle_grid(const std::string& config, std::uint64_t seed) {
    const auto cfg = ex::load_config(config);
    const auto problem = ex::make_problem(cfg, seed);
    tobo::OracleOptions oo = cfg.oracle;
    oo.seed = tobo::stream_seed(seed, tobo::Stream::Problem, 1);
    const tobo::Optimum o = cfg.task == ex::Task::CBBO ? tobo::true_optimum_cbbo(*problem, cfg.scalarization, cfg.k, oo)
                                                       : tobo::true_optimum(*problem, cfg.scalarization, oo);
    json out = {{"x", tobo::vector_to_json(o.x)}, {"value", o.value}};
    out["lambda"] = o.lambda ? json(o.lambda->bitstring()) : json(nullptr);
    json ties = json::array();
    for (const auto& t : o.ties)
        ties.push_back({{"x", tobo::vector_to_json(t.x)}, {"lambda", t.lambda.bitstring()}, {"value", t.value}});
    out["ties"] = ties;
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor-output Bayesian optimization experiments"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run every seed of an experiment config");
    std::string run_config;
    std::optional<std::string> run_output;
    std::string superarm_mode;
    std::size_t jobs = 1;
    run->add_option("config", run_config, "Config file (JSON)")->required();
    run->add_option("-o,--output-dir", run_output, "Override output_dir");
    run->add_option("--superarm-mode", superarm_mode, "Super-arm selection: greedy or exact")
        ->check(CLI::IsMember({"greedy", "exact"}));
    run->add_option("-j,--jobs", jobs, "Seeds run concurrently")->check(CLI::PositiveNumber);

    auto* validate = app.add_subcommand("validate", "Check a config and print it with defaults resolved");
    std::string validate_config;
    validate->add_option("config", validate_config, "Config file (JSON)")->required();

    auto* summarize = app.add_subcommand("summarize", "Aggregate per-seed records and metrics");
    std::vector<std::string> summarize_inputs;
    std::optional<std::string> summarize_output;
    summarize->add_option("inputs", summarize_inputs, "Run directories or per-seed files")->required();
    summarize->add_option("-o,--output-dir", summarize_output, "Where to write summary.json and regret_curve.csv");

    auto* oracle = app.add_subcommand("oracle", "Brute-force reference computations");
    oracle->require_subcommand(1);
    auto* grid = oracle->add_subcommand("grid", "Numerical optimum of a config's problem");
    std::string grid_config;
    std::uint64_t grid_seed = 0;
    grid->add_option("config", grid_config, "Config file (JSON)")->required();
    grid->add_option("--seed", grid_seed, "Run seed selecting the problem instance");
    auto* superarm = oracle->add_subcommand("superarm", "Enumerate every super-arm of a latent posterior");
    std::string superarm_input;
    superarm->add_option("input", superarm_input, "JSON with mean, cov, k, rho, scalarization")->required();
    auto* joint = oracle->add_subcommand("joint", "Dense joint-Gaussian conditioning of a saved surrogate");
    std::string joint_input;
    joint->add_option("input", joint_input, "JSON with surrogate (document or path) and x")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ex::RunOptions opts;
            opts.output_dir = run_output;
            opts.jobs = jobs;
            if (!superarm_mode.empty()) opts.superarm_mode = tobo::superarm_mode_from_string(superarm_mode);
            const auto outcomes = ex::run(ex::load_config(run_config), opts);
            int status = 0;
            for (const auto& o : outcomes)
                if (o.failed) {
                    std::cerr << "seed " << o.seed << " failed: " << o.failure << "\n";
                    status = kExitFailure;
                }
            return status;
        }
        if (*validate) {
            std::cout << ex::to_json(ex::load_config(validate_config)).dump(2) << "\n";
            return 0;
        }
        if (*summarize) {
            std::vector<fs::path> inputs(summarize_inputs.begin(), summarize_inputs.end());
            const auto s = ex::summarize(inputs);
            fs::path dir = summarize_output ? fs::path(*summarize_output)
                           : fs::is_directory(inputs.front()) ? inputs.front()
                                                              : inputs.front().parent_path();
            if (dir.empty()) dir = ".";
            ex::write_summary(s, dir);
            std::cout << s.document.dump(2) << "\n";
            return 0;
        }
        if (*grid) return oracle_grid(grid_config, grid_seed);
        if (*superarm) return oracle_superarm(superarm_input);
        if (*joint) return oracle_joint(joint_input);
    } catch (const tobo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return 0;
}
