#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "tobo/error.hpp"
#include "tobo/experiment.hpp"

namespace tobo::experiment {

using nlohmann::json;

namespace {

bool non_negative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

/// Object reader that records which keys were consumed so leftovers can be rejected.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) {
        used_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(key);
    }

    template <class T>
    std::optional<T> optional(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return convert<T>(key);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
    }

private:
    template <class T>
    T convert(const std::string& key) {
        const json& v = j_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(at(key), "expected a boolean");
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!non_negative_integer(v))
                throw ConfigError(at(key), "expected a non-negative integer");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(at(key), "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(at(key), "expected a string");
        }
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(at(key), "has the wrong type");
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <class E, class F>
E enum_field(Fields& f, const std::string& key, E fallback, F parse, const char* expected) {
    if (!f.has(key)) return fallback;
    const auto s = f.get<std::string>(key, "");
    try {
        return parse(s);
    } catch (const std::exception&) {
        throw ConfigError(f.at(key), "unknown value '" + s + "' (expected " + expected + ")");
    }
}

std::vector<std::size_t> size_list(Fields& f, const std::string& key) {
    if (!f.has(key)) return {};
    const json& v = f.raw(key);
    if (!v.is_array()) throw ConfigError(f.at(key), "expected an array of positive integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
        if (!non_negative_integer(e) || e.get<std::size_t>() == 0)
            throw ConfigError(f.at(key), "expected an array of positive integers");
        out.push_back(e.get<std::size_t>());
    }
    return out;
}

CoreSpec parse_core(const json& j, const std::string& path, std::size_t modes) {
    Fields f(j, path);
    CoreSpec spec;
    spec.kind = enum_field(f, "kind", CoreKind::Full, core_kind_from_string, "full, cp or tt");
    if (spec.kind == CoreKind::CP) {
        spec.cp_rank = f.get<std::size_t>("rank", 1);
        if (spec.cp_rank == 0) throw ConfigError(f.at("rank"), "must be at least 1");
    }
    if (spec.kind == CoreKind::TT) {
        spec.tt_ranks = size_list(f, "ranks");
        if (spec.tt_ranks.empty()) {
            spec.tt_ranks.assign(modes + 1, 1);
        } else if (spec.tt_ranks.size() != modes + 1 || spec.tt_ranks.front() != 1 || spec.tt_ranks.back() != 1) {
            throw ConfigError(f.at("ranks"), "needs m + 1 = " + std::to_string(modes + 1) +
                                                 " entries with boundary ranks 1");
        }
    }
    f.finish();
    return spec;
}

json core_to_json(const CoreSpec& s) {
    json j = {{"kind", to_string(s.kind)}};
    if (s.kind == CoreKind::CP) j["rank"] = s.cp_rank;
    if (s.kind == CoreKind::TT) j["ranks"] = s.tt_ranks;
    return j;
}

Task task_from_string(const std::string& s) {
    if (s == "bo") return Task::BO;
    if (s == "cbbo") return Task::CBBO;
    if (s == "fit") return Task::Fit;
    throw std::invalid_argument("unknown task");
}

TensorKernel::Kind kernel_kind_from_string(const std::string& s) {
    if (s == "separable") return TensorKernel::Kind::Separable;
    if (s == "non_separable") return TensorKernel::Kind::NonSeparable;
    throw std::invalid_argument("unknown kernel");
}

std::string to_string(TensorKernel::Kind k) { return k == TensorKernel::Kind::Separable ? "separable" : "non_separable"; }

SolverKind solver_from_string(const std::string& s) {
    if (s == "dense") return SolverKind::Dense;
    if (s == "kronecker") return SolverKind::Kronecker;
    throw std::invalid_argument("unknown solver");
}

std::string to_string(SolverKind s) { return s == SolverKind::Dense ? "dense" : "kronecker"; }

BetaSchedule::Kind beta_kind_from_string(const std::string& s) {
    if (s == "practical") return BetaSchedule::Kind::Practical;
    if (s == "theoretical") return BetaSchedule::Kind::Theoretical;
    throw std::invalid_argument("unknown beta kind");
}

BetaSchedule::Form beta_form_from_string(const std::string& s) {
    if (s == "printed") return BetaSchedule::Form::Printed;
    if (s == "sqrt") return BetaSchedule::Form::Sqrt;
    throw std::invalid_argument("unknown beta form");
}

ProblemConfig parse_problem(const json& j) {
    Fields f(j, "problem");
    ProblemConfig p;
    const std::string type = f.get<std::string>("type", "synthetic");
    if (type == "synthetic") {
        p.type = ProblemConfig::Type::Synthetic;
        p.setting = f.optional<int>("setting");
        auto T = size_list(f, "T");
        auto P = size_list(f, "P");
        if (p.setting) {
            if (*p.setting < 1 || *p.setting > 3) throw ConfigError(f.at("setting"), "must be 1, 2 or 3");
            const SyntheticSpec s = synthetic_setting(*p.setting);
            if ((!T.empty() && T != s.T) || (!P.empty() && P != s.P))
                throw ConfigError(f.at("setting"), "T and P contradict the chosen setting");
            T = s.T;
            P = s.P;
        } else if (T.empty() || P.empty()) {
            throw ConfigError(f.at("T"), "synthetic problems need a setting or both T and P");
        }
        p.T = T;
        p.P = P;
        p.noise_std = f.get<double>("noise_std", 0.1);
        p.seed = f.optional<std::uint64_t>("seed");
        SyntheticSpec check{p.T, p.P, p.noise_std, 0};
        try {
            check.validate();
        } catch (const std::exception& e) {
            throw ConfigError("problem", e.what());
        }
    } else if (type == "dataset") {
        p.type = ProblemConfig::Type::Dataset;
        if (!f.has("path")) throw ConfigError(f.at("path"), "required for dataset problems");
        p.path = f.get<std::string>("path", "");
        p.d = f.get<std::size_t>("d", 0);
        if (p.d == 0) throw ConfigError(f.at("d"), "required and must be positive");
        p.shape = size_list(f, "shape");
        if (p.shape.empty()) throw ConfigError(f.at("shape"), "required for dataset problems");
        p.test_fraction = f.get<double>("test_fraction", 0.2);
        if (!(p.test_fraction > 0.0 && p.test_fraction < 1.0))
            throw ConfigError(f.at("test_fraction"), "must lie in (0, 1)");
    } else {
        throw ConfigError(f.at("type"), "unknown value '" + type + "'");
    }
    f.finish();
    return p;
}

}  // namespace

std::string to_string(Task t) {
    switch (t) {
        case Task::BO: return "bo";
        case Task::CBBO: return "cbbo";
        case Task::Fit: return "fit";
    }
    return "bo";
}

std::size_t ProblemConfig::input_dim() const { return type == Type::Synthetic ? P.back() : d; }

TensorShape ProblemConfig::output_shape() const { return TensorShape(type == Type::Synthetic ? T : shape); }

ExperimentConfig parse_config(const json& j) {
    Fields root(j, "");
    if (!root.has("schema_version")) throw ConfigError("schema_version", "required");
    if (root.get<int>("schema_version", 0) != kConfigSchemaVersion)
        throw ConfigError("schema_version", "unsupported version; expected " + std::to_string(kConfigSchemaVersion));

    ExperimentConfig c;
    c.task = enum_field(root, "task", Task::BO, task_from_string, "bo, cbbo or fit");
    if (!root.has("problem")) throw ConfigError("problem", "required");
    c.problem = parse_problem(root.raw("problem"));
    const std::size_t d = c.problem.input_dim();
    const TensorShape shape = c.problem.output_shape();
    const std::size_t T = shape.total();
    if (c.problem.type == ProblemConfig::Type::Dataset && c.task != Task::Fit)
        throw ConfigError("task", "dataset problems support task 'fit' only");

    if (root.has("surrogate")) {
        Fields f(root.raw("surrogate"), "surrogate");
        c.surrogate.kernel.kind = enum_field(f, "kernel", TensorKernel::Kind::Separable, kernel_kind_from_string, "separable or non_separable");
        c.surrogate.kernel.family = enum_field(f, "base", BaseFamily::Matern52, base_family_from_string, "matern52 or gaussian");
        if (f.has("core")) c.surrogate.kernel.core = parse_core(f.raw("core"), f.at("core"), shape.modes());
        if (f.has("rank_candidates")) {
            const json& rc = f.raw("rank_candidates");
            if (!rc.is_array()) throw ConfigError(f.at("rank_candidates"), "expected an array of core specs");
            for (std::size_t i = 0; i < rc.size(); ++i)
                c.rank_candidates.push_back(
                    parse_core(rc[i], f.at("rank_candidates") + "[" + std::to_string(i) + "]", shape.modes()));
        }
        c.surrogate.refit_every = f.get<std::size_t>("refit_every", 1);
        if (c.surrogate.refit_every == 0) throw ConfigError(f.at("refit_every"), "must be at least 1");
        c.surrogate.center_outputs = f.get<bool>("center_outputs", true);
        c.surrogate.fit.lbfgs.max_iterations = f.get<int>("fit_max_iterations", c.surrogate.fit.lbfgs.max_iterations);
        if (c.surrogate.fit.lbfgs.max_iterations < 0)
            throw ConfigError(f.at("fit_max_iterations"), "must be non-negative");
        c.solver = enum_field(f, "solver", SolverKind::Dense, solver_from_string, "dense or kronecker");
        c.surrogate.initial_lengthscale_fraction =
            f.get<double>("initial_lengthscale_fraction", c.surrogate.initial_lengthscale_fraction);
        c.surrogate.initial_noise_fraction = f.get<double>("initial_noise_fraction", c.surrogate.initial_noise_fraction);
        if (!(c.surrogate.initial_lengthscale_fraction > 0.0))
            throw ConfigError(f.at("initial_lengthscale_fraction"), "must be positive");
        if (!(c.surrogate.initial_noise_fraction > 0.0))
            throw ConfigError(f.at("initial_noise_fraction"), "must be positive");
        f.finish();
    }
    if (c.solver == SolverKind::Kronecker && c.surrogate.kernel.kind != TensorKernel::Kind::Separable)
        throw ConfigError("surrogate.solver", "the Kronecker solver needs a separable kernel");
    if (c.surrogate.kernel.core.kind == CoreKind::TT && c.surrogate.kernel.core.tt_ranks.empty())
        c.surrogate.kernel.core.tt_ranks.assign(shape.modes() + 1, 1);

    if (root.has("scalarization")) {
        Fields f(root.raw("scalarization"), "scalarization");
        c.scalarization.kind = enum_field(f, "kind", Scalarization::Kind::Sum, scalarization_kind_from_string,
                                            "sum, weighted_sum or exp_weighted");
        if (f.has("weights")) {
            const auto w = f.get<std::vector<double>>("weights", {});
            c.scalarization.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        }
        c.scalarization.p = f.get<double>("p", 1.0);
        f.finish();
    }
    c.scalarization.validate(T);

    if (root.has("schedules")) {
        Fields f(root.raw("schedules"), "schedules");
        if (f.has("beta")) {
            Fields b(f.raw("beta"), "schedules.beta");
            c.beta.kind = enum_field(b, "kind", c.beta.kind, beta_kind_from_string, "practical or theoretical");
            c.beta.form = enum_field(b, "form", c.beta.form, beta_form_from_string, "printed or sqrt");
            c.beta.c0 = b.get<double>("c0", c.beta.c0);
            c.beta.c1 = b.get<double>("c1", c.beta.c1);
            c.beta.delta = b.get<double>("delta", c.beta.delta);
            c.beta.r = b.get<double>("r", c.beta.r);
            c.beta.a = b.get<double>("a", c.beta.a);
            c.beta.b = b.get<double>("b", c.beta.b);
            c.beta.c_grad = b.get<double>("c_grad", c.beta.c_grad);
            b.finish();
            try {
                c.beta.validate();
            } catch (const std::exception& e) {
                throw ConfigError("schedules.beta", e.what());
            }
        }
        if (f.has("rho")) {
            Fields r(f.raw("rho"), "schedules.rho");
            c.rho_delta = r.get<double>("delta", c.rho_delta);
            if (!(c.rho_delta > 0.0 && c.rho_delta < 1.0)) throw ConfigError(r.at("delta"), "must lie in (0, 1)");
            r.finish();
        }
        f.finish();
    }

    c.n0 = 5 * d;
    c.N = 10 * d;
    c.k = std::max<std::size_t>(1, T / 6);
    if (root.has("loop")) {
        Fields f(root.raw("loop"), "loop");
        c.n0 = f.get<std::size_t>("n0", c.n0);
        c.N = f.get<std::size_t>("N", c.N);
        c.k = f.get<std::size_t>("k", c.k);
        c.fail_after = f.get<std::size_t>("fail_after", c.fail_after);
        c.superarm_mode = enum_field(f, "superarm_mode", c.superarm_mode, superarm_mode_from_string, "greedy or exact");
        f.finish();
    }
    if (c.n0 == 0 && c.task != Task::Fit) throw ConfigError("loop.n0", "must be at least 1");
    if (c.task == Task::CBBO) {
        if (c.k < 1 || c.k > T)
            throw ConfigError("loop.k", "must satisfy 1 <= k <= T = " + std::to_string(T) + ", got " + std::to_string(c.k));
        if (c.superarm_mode == SuperarmMode::Exact && binomial(T, c.k) > kExactSuperarmLimit)
            throw ConfigError("loop.superarm_mode", "exact enumeration exceeds the subset limit; use greedy");
    }

    if (root.has("search")) {
        Fields f(root.raw("search"), "search");
        c.search.starts = f.get<std::size_t>("starts", c.search.starts);
        c.search.local.max_iterations = f.get<int>("max_iterations", c.search.local.max_iterations);
        c.search.local.fd_step = f.get<double>("fd_step", c.search.local.fd_step);
        if (!(c.search.local.fd_step > 0.0)) throw ConfigError(f.at("fd_step"), "must be positive");
        f.finish();
    }
    if (c.search.starts == 0) c.search.starts = 32 * d;

    if (root.has("oracle")) {
        Fields f(root.raw("oracle"), "oracle");
        c.oracle.grid = f.get<std::size_t>("grid", c.oracle.grid);
        c.oracle.max_grid_dim = f.get<std::size_t>("max_grid_dim", c.oracle.max_grid_dim);
        c.oracle.starts = f.get<std::size_t>("starts", c.oracle.starts);
        c.oracle.polish = f.get<bool>("polish", c.oracle.polish);
        c.oracle.tie_tolerance = f.get<double>("tie_tolerance", c.oracle.tie_tolerance);
        if (c.oracle.grid < 2) throw ConfigError(f.at("grid"), "needs at least 2 points per dimension");
        if (c.oracle.starts == 0) throw ConfigError(f.at("starts"), "must be at least 1");
        f.finish();
    }

    c.fit.train_size = 10 * d;
    c.fit.test_size = 50;
    if (root.has("fit")) {
        Fields f(root.raw("fit"), "fit");
        c.fit.train_size = f.get<std::size_t>("train_size", c.fit.train_size);
        c.fit.test_size = f.get<std::size_t>("test_size", c.fit.test_size);
        if (c.fit.train_size < 2) throw ConfigError(f.at("train_size"), "must be at least 2");
        if (c.fit.test_size < 1) throw ConfigError(f.at("test_size"), "must be at least 1");
        f.finish();
    }

    if (!root.has("seeds")) throw ConfigError("seeds", "required");
    if (!root.raw("seeds").is_array()) throw ConfigError("seeds", "expected an array of non-negative integers");
    for (std::size_t i = 0; i < root.raw("seeds").size(); ++i)
        if (!non_negative_integer(root.raw("seeds")[i]))
            throw ConfigError("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
    c.seeds = root.get<std::vector<std::uint64_t>>("seeds", {});
    if (c.seeds.empty()) throw ConfigError("seeds", "must be nonempty");
    std::set<std::uint64_t> unique(c.seeds.begin(), c.seeds.end());
    if (unique.size() != c.seeds.size()) throw ConfigError("seeds", "must be distinct");
    c.output_dir = root.get<std::string>("output_dir", c.output_dir);
    if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    root.finish();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // Convert the byte offset into a line and column.
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col), "syntax error");
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json problem;
    if (c.problem.type == ProblemConfig::Type::Synthetic) {
        problem = {{"type", "synthetic"}, {"T", c.problem.T}, {"P", c.problem.P}, {"noise_std", c.problem.noise_std}};
        problem["setting"] = c.problem.setting ? json(*c.problem.setting) : json(nullptr);
        problem["seed"] = c.problem.seed ? json(*c.problem.seed) : json(nullptr);
    } else {
        problem = {{"type", "dataset"},
                   {"path", c.problem.path},
                   {"d", c.problem.d},
                   {"shape", c.problem.shape},
                   {"test_fraction", c.problem.test_fraction}};
    }
    json candidates = json::array();
    for (const auto& s : c.rank_candidates) candidates.push_back(core_to_json(s));
    const auto& w = c.scalarization.weights;
    return {
        {"schema_version", kConfigSchemaVersion},
        {"task", to_string(c.task)},
        {"problem", problem},
        {"surrogate",
         {{"kernel", to_string(c.surrogate.kernel.kind)},
          {"base", to_string(c.surrogate.kernel.family)},
          {"core", core_to_json(c.surrogate.kernel.core)},
          {"rank_candidates", candidates},
          {"refit_every", c.surrogate.refit_every},
          {"center_outputs", c.surrogate.center_outputs},
          {"fit_max_iterations", c.surrogate.fit.lbfgs.max_iterations},
          {"solver", to_string(c.solver)},
          {"initial_lengthscale_fraction", c.surrogate.initial_lengthscale_fraction},
          {"initial_noise_fraction", c.surrogate.initial_noise_fraction}}},
        {"scalarization",
         {{"kind", to_string(c.scalarization.kind)},
          {"weights", std::vector<double>(w.data(), w.data() + w.size())},
          {"p", c.scalarization.p}}},
        {"schedules",
         {{"beta",
           {{"kind", c.beta.kind == BetaSchedule::Kind::Practical ? "practical" : "theoretical"},
            {"form", c.beta.form == BetaSchedule::Form::Printed ? "printed" : "sqrt"},
            {"c0", c.beta.c0},
            {"c1", c.beta.c1},
            {"delta", c.beta.delta},
            {"r", c.beta.r},
            {"a", c.beta.a},
            {"b", c.beta.b},
            {"c_grad", c.beta.c_grad}}},
          {"rho", {{"delta", c.rho_delta}}}}},
        {"loop",
         {{"n0", c.n0},
          {"N", c.N},
          {"k", c.k},
          {"superarm_mode", to_string(c.superarm_mode)},
          {"fail_after", c.fail_after}}},
        {"search",
         {{"starts", c.search.starts},
          {"max_iterations", c.search.local.max_iterations},
          {"fd_step", c.search.local.fd_step}}},
        {"oracle",
         {{"grid", c.oracle.grid},
          {"max_grid_dim", c.oracle.max_grid_dim},
          {"starts", c.oracle.starts},
          {"polish", c.oracle.polish},
          {"tie_tolerance", c.oracle.tie_tolerance}}},
        {"fit", {{"train_size", c.fit.train_size}, {"test_size", c.fit.test_size}}},
        {"seeds", c.seeds},
        {"output_dir", c.output_dir},
    };
}

std::filesystem::path resolve_output_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("TOBO_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / p;
    return p;
}

}  // namespace tobo::experiment
