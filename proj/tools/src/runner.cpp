#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include "tobo/error.hpp"
#include "tobo/experiment.hpp"
#include "tobo/sampling.hpp"
#include "tobo/serialize.hpp"

namespace tobo::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::unique_ptr<TensorProblem> make_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.problem.type != ProblemConfig::Type::Synthetic)
        throw ConfigError("problem.type", "only synthetic problems can be evaluated at new inputs");
    SyntheticSpec spec{cfg.problem.T, cfg.problem.P, cfg.problem.noise_std, cfg.problem.seed.value_or(seed)};
    return std::make_unique<SyntheticProblem>(std::move(spec));
}

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json metrics_json(const MetricReport& m) {
    json j = json::object();
    if (m.nll) j["nll"] = *m.nll;
    if (m.mae) j["mae"] = *m.mae;
    if (m.cov_norm) j["cov_norm"] = *m.cov_norm;
    if (m.mse_x) j["mse_x"] = *m.mse_x;
    if (m.mae_y) j["mae_y"] = *m.mae_y;
    if (m.acc) j["acc"] = *m.acc;
    if (m.final_regret) j["final_regret"] = *m.final_regret;
    j["excluded"] = m.excluded;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string seed_name(const std::string& stem, std::uint64_t seed, const std::string& ext) {
    return stem + "_seed" + std::to_string(seed) + ext;
}

/// Append-only per-round record file, flushed after every row.
class RecordWriter {
public:
    RecordWriter(const fs::path& path, std::uint64_t seed, std::size_t d, std::string phase)
        : out_(path, std::ios::binary | std::ios::trunc), seed_(seed), phase_(std::move(phase)) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << "seed,round,phase";
        for (std::size_t i = 1; i <= d; ++i) out_ << ",x" << i;
        out_ << ",lambda,scalarized,incumbent,regret,cumulative_regret\n";
        out_.flush();
    }

    void operator()(const RunRecord& r) {
        out_ << seed_ << ',' << r.round << ',' << (r.initial ? "initial" : phase_);
        for (Eigen::Index i = 0; i < r.x.size(); ++i) out_ << ',' << format_double(r.x(i));
        out_ << ',' << r.selection.bitstring() << ',' << format_double(r.scalarized) << ','
             << format_double(r.incumbent) << ',' << (r.regret ? format_double(*r.regret) : "") << ','
             << (r.cumulative_regret ? format_double(*r.cumulative_regret) : "") << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
    std::uint64_t seed_;
    std::string phase_;
};

json optimum_json(const Optimum& o) {
    json j = {{"x", vec_json(o.x)}, {"value", o.value}};
    j["lambda"] = o.lambda ? json(o.lambda->bitstring()) : json(nullptr);
    if (!o.ties.empty()) {
        json ties = json::array();
        for (const auto& t : o.ties) ties.push_back({{"x", vec_json(t.x)}, {"lambda", t.lambda.bitstring()}, {"value", t.value}});
        j["ties"] = ties;
    }
    return j;
}

SeedOutcome run_optimization(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
    const auto problem = make_problem(cfg, seed);
    const std::size_t d = problem->domain().dim();
    OracleOptions oo = cfg.oracle;
    oo.seed = stream_seed(seed, Stream::Problem, 1);
    const bool cbbo = cfg.task == Task::CBBO;
    const Optimum opt = cbbo ? true_optimum_cbbo(*problem, cfg.scalarization, cfg.k, oo)
                             : true_optimum(*problem, cfg.scalarization, oo);

    LoopConfig lc;
    lc.n0 = cfg.n0;
    lc.N = cfg.N;
    lc.fail_after = cfg.fail_after;
    lc.seed = seed;
    lc.scalarization = cfg.scalarization;
    lc.beta = cfg.beta;
    lc.search = cfg.search;
    lc.surrogate = cfg.surrogate;
    lc.optimum = opt.value;

    RecordWriter writer(dir / seed_name("records", seed, ".csv"), seed, d, to_string(cfg.task));
    const RecordSink sink = [&](const RunRecord& r) { writer(r); };
    RunResult run;
    if (cbbo) {
        TocbboConfig tc;
        tc.loop = lc;
        tc.k = cfg.k;
        tc.rho = RhoSchedule{cfg.rho_delta, cfg.N};
        tc.mode = cfg.superarm_mode;
        run = run_tocbbo(*problem, tc, sink);
    } else {
        run = run_tobo(*problem, lc, sink);
    }

    json m = {{"schema", "tobo.metrics"}, {"version", 1}, {"seed", seed}, {"task", to_string(cfg.task)}};
    m["failed"] = run.failed;
    m["failure"] = run.failure;
    m["rounds"] = run.records.size();
    m["optimum"] = optimum_json(opt);
    if (!run.records.empty()) {
        const RunRecord& best = run.records[run.best];
        m["recommendation"] = {{"round", best.round},
                               {"x", vec_json(best.x)},
                               {"lambda", best.selection.bitstring()},
                               {"scalarized", best.scalarized}};
        m["metrics"] = metrics_json(optimization_metrics(*problem, run, opt));
    } else {
        m["metrics"] = json::object();
    }
    write_json(dir / seed_name("metrics", seed, ".json"), m);

    if (run.hyper) {
        const auto n = static_cast<Eigen::Index>(run.records.size());
        Eigen::MatrixXd X(n, static_cast<Eigen::Index>(d));
        std::vector<double> y;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& r = run.records[static_cast<std::size_t>(i)];
            X.row(i) = r.x.transpose();
            y.insert(y.end(), r.y.data(), r.y.data() + r.y.size());
        }
        const Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
        json doc;
        if (cbbo) {
            PartialDataset pd{X, {}, Y, cfg.k};
            for (const auto& r : run.records) pd.selections.push_back(r.selection);
            doc = surrogate_to_json(*run.hyper, pd);
        } else {
            doc = surrogate_to_json(*run.hyper, Dataset{X, Y});
        }
        write_json(dir / seed_name("surrogate", seed, ".json"), doc);
    }
    return {seed, run.failed, run.failure};
}

InputDomain bounding_box(const Eigen::MatrixXd& X) {
    Eigen::VectorXd lo = X.colwise().minCoeff().transpose(), hi = X.colwise().maxCoeff().transpose();
    for (Eigen::Index j = 0; j < lo.size(); ++j)
        if (!(hi(j) > lo(j))) {
            lo(j) -= 0.5;
            hi(j) += 0.5;
        }
    return InputDomain(lo, hi);
}

SeedOutcome run_fit(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
    const TensorShape shape = cfg.problem.output_shape();
    const std::size_t T = shape.total();
    Dataset train, test;
    if (cfg.problem.type == ProblemConfig::Type::Dataset) {
        const Dataset all = load_table(cfg.problem.path, cfg.problem.d, T);
        std::tie(train, test) = split_dataset(all, T, cfg.problem.test_fraction, stream_seed(seed, Stream::Design));
    } else {
        // Noisy training observations, noiseless test truth.
        const auto problem = make_problem(cfg, seed);
        std::mt19937_64 design(stream_seed(seed, Stream::Design)), noise(stream_seed(seed, Stream::Noise));
        std::mt19937_64 test_design(stream_seed(seed, Stream::Design, 1));
        train.X = latin_hypercube(cfg.fit.train_size, problem->domain(), design);
        test.X = latin_hypercube(cfg.fit.test_size, problem->domain(), test_design);
        train.Y.resize(train.X.rows() * static_cast<Eigen::Index>(T));
        test.Y.resize(test.X.rows() * static_cast<Eigen::Index>(T));
        const auto Ti = static_cast<Eigen::Index>(T);
        for (Eigen::Index i = 0; i < train.X.rows(); ++i)
            train.Y.segment(i * Ti, Ti) = problem->evaluate(train.X.row(i).transpose(), noise);
        for (Eigen::Index i = 0; i < test.X.rows(); ++i) test.Y.segment(i * Ti, Ti) = problem->truth(test.X.row(i).transpose());
    }

    json m = {{"schema", "tobo.metrics"}, {"version", 1}, {"seed", seed}, {"task", "fit"}};
    m["train_size"] = train.size();
    m["test_size"] = test.size();
    SeedOutcome outcome{seed, false, ""};
    try {
        const InputDomain domain = bounding_box(train.X);
        const EntryLists entries = full_entries(train.size(), T);
        TensorKernel kernel =
            make_kernel(cfg.surrogate.kernel, shape, domain, cfg.surrogate.initial_lengthscale_fraction);
        if (!cfg.rank_candidates.empty()) {
            RankSelectionOptions ro;
            ro.seed = stream_seed(seed, Stream::Design, 2);
            const TogpHyper init = initial_hyper(kernel, entries, train.Y, cfg.surrogate);
            ro.fit = resolve_fit_options(cfg.surrogate, domain, init.noise_variance / cfg.surrogate.initial_noise_fraction);
            const RankSelection sel = select_rank(train, init, cfg.rank_candidates, ro);
            json cands = json::array();
            for (const auto& c : sel.candidates) {
                json e = {{"kind", to_string(c.spec.kind)}, {"params", c.param_count}, {"ok", c.ok}};
                if (c.spec.kind == CoreKind::CP) e["rank"] = c.spec.cp_rank;
                if (c.spec.kind == CoreKind::TT) e["ranks"] = c.spec.tt_ranks;
                e["mae"] = c.ok ? json(c.mae) : json(nullptr);
                if (!c.ok) e["error"] = c.error;
                cands.push_back(e);
            }
            m["rank_selection"] = cands;
            kernel = with_core_spec(kernel, sel.best);
        }
        const TogpHyper init = initial_hyper(kernel, entries, train.Y, cfg.surrogate);
        const FitOptions fo =
            resolve_fit_options(cfg.surrogate, domain, init.noise_variance / cfg.surrogate.initial_noise_fraction);
        const FitResult fr = fit(train, init, fo);
        const TogpModel model(fr.hyper, train, cfg.solver);
        json metrics = metrics_json(surrogate_metrics(model, test));
        metrics["nll_init"] = -fr.initial_log_likelihood;
        m["metrics"] = metrics;
        m["fit"] = {{"iterations", fr.iterations}, {"converged", fr.converged}, {"status", fr.status}};
        write_json(dir / seed_name("surrogate", seed, ".json"), surrogate_to_json(fr.hyper, train));
    } catch (const NumericalError& e) {
        outcome.failed = true;
        outcome.failure = e.what();
        m["metrics"] = json::object();
    }
    m["failed"] = outcome.failed;
    m["failure"] = outcome.failure;
    write_json(dir / seed_name("metrics", seed, ".json"), m);
    return outcome;
}

}  // namespace

SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
    fs::create_directories(dir);
    const fs::path marker = dir / seed_name("FAILED", seed, "");
    fs::remove(marker);
    SeedOutcome o;
    try {
        o = cfg.task == Task::Fit ? run_fit(cfg, seed, dir) : run_optimization(cfg, seed, dir);
    } catch (const NumericalError& e) {
        o = {seed, true, e.what()};
    }
    if (o.failed) write_text(marker, o.failure + "\n");
    return o;
}

std::vector<SeedOutcome> run(const ExperimentConfig& base, const RunOptions& opts) {
    ExperimentConfig cfg = base;
    if (opts.output_dir) cfg.output_dir = *opts.output_dir;
    if (opts.superarm_mode) cfg.superarm_mode = *opts.superarm_mode;
    const fs::path dir = resolve_output_dir(cfg.output_dir);
    fs::create_directories(dir);
    write_json(dir / "config.resolved.json", to_json(cfg));

    std::vector<SeedOutcome> out(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < cfg.seeds.size();) {
            try {
                out[i] = run_seed(cfg, cfg.seeds[i], dir);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(opts.jobs, 1, cfg.seeds.size());
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    write_summary(summarize({dir}), dir);
    return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

struct SeedData {
    std::map<std::string, double> metrics;
    std::vector<std::pair<std::size_t, double>> regret;
    bool failed = false;
    bool has_records = false;
};

std::optional<std::uint64_t> seed_of(const fs::path& p, const std::string& stem) {
    static const std::regex re(R"(^(records|metrics)_seed(\d+)\.(csv|json)$)");
    std::smatch m;
    const std::string name = p.filename().string();
    if (!std::regex_match(name, m, re) || m[1] != stem) return std::nullopt;
    return std::stoull(m[2]);
}

}  // namespace

Summary summarize(const std::vector<fs::path>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (const auto& e : fs::directory_iterator(in))
                if (seed_of(e.path(), "records") || seed_of(e.path(), "metrics")) files.push_back(e.path());
        } else if (fs::exists(in)) {
            files.push_back(in);
        } else {
            throw ConfigError(in.string(), "no such file or directory");
        }
    }
    std::sort(files.begin(), files.end());

    std::map<std::uint64_t, SeedData> seeds;
    std::optional<std::string> header;
    std::optional<std::string> header_file;
    for (const auto& f : files) {
        if (auto s = seed_of(f, "records")) {
            std::ifstream in(f);
            std::string line;
            if (!std::getline(in, line)) throw ConfigError(f.string(), "empty records file");
            if (header && *header != line)
                throw ConfigError(f.string(), "records header differs from " + *header_file);
            header = line;
            header_file = f.string();
            const auto cols = split_csv(line);
            const auto col = [&](const std::string& name) {
                const auto it = std::find(cols.begin(), cols.end(), name);
                if (it == cols.end()) throw ConfigError(f.string(), "missing column '" + name + "'");
                return static_cast<std::size_t>(it - cols.begin());
            };
            const std::size_t ci_round = col("round"), ci_regret = col("regret");
            SeedData& sd = seeds[*s];
            sd.has_records = true;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto fields = split_csv(line);
                if (fields.size() != cols.size()) throw ConfigError(f.string(), "row has the wrong number of fields");
                if (!fields[ci_regret].empty())
                    sd.regret.emplace_back(std::stoull(fields[ci_round]), std::stod(fields[ci_regret]));
            }
        } else if (auto s2 = seed_of(f, "metrics")) {
            std::ifstream in(f);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception&) {
                throw ConfigError(f.string(), "not valid JSON");
            }
            if (j.value("schema", std::string()) != "tobo.metrics") throw ConfigError(f.string(), "not a metrics document");
            SeedData& sd = seeds[*s2];
            sd.failed = j.value("failed", false);
            const json metrics = j.value("metrics", json::object());
            for (const auto& [k, v] : metrics.items())
                if (v.is_number() && k != "excluded") sd.metrics[k] = v.get<double>();
        } else {
            throw ConfigError(f.string(), "expected records_seed<N>.csv or metrics_seed<N>.json");
        }
    }
    if (seeds.empty()) throw ConfigError("inputs", "no per-seed files found");

    Summary out;
    json seed_list = json::array(), failed = json::array();
    std::map<std::string, std::vector<double>> values;
    std::map<std::size_t, std::vector<double>> curve;
    for (auto& [seed, sd] : seeds) {
        seed_list.push_back(seed);
        if (sd.failed) failed.push_back(seed);
        if (!sd.metrics.count("final_regret") && !sd.regret.empty()) sd.metrics["final_regret"] = sd.regret.back().second;
        for (const auto& [k, v] : sd.metrics) values[k].push_back(v);
        for (const auto& [round, r] : sd.regret) curve[round].push_back(std::log10(std::max(r, 1e-12)));
    }
    json metrics = json::object();
    for (const auto& [k, v] : values) {
        const double q25 = quantile(v, 0.25), q75 = quantile(v, 0.75);
        metrics[k] = {{"n", v.size()}, {"median", quantile(v, 0.5)}, {"q25", q25}, {"q75", q75}, {"iqr", q75 - q25}};
    }
    out.document = {{"schema", "tobo.summary"},
                    {"version", 1},
                    {"seeds", seed_list},
                    {"failed_seeds", failed},
                    {"metrics", metrics}};
    for (const auto& [round, v] : curve) out.regret_curve.emplace_back(round, quantile(v, 0.5), v.size());
    return out;
}

void write_summary(const Summary& s, const fs::path& dir) {
    fs::create_directories(dir);
    write_json(dir / "summary.json", s.document);
    std::ostringstream csv;
    csv << "round,median_log10_regret,seeds\n";
    for (const auto& [round, v, n] : s.regret_curve) csv << round << ',' << format_double(v) << ',' << n << '\n';
    write_text(dir / "regret_curve.csv", csv.str());
}

}  // namespace tobo::experiment
