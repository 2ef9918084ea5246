#include "tobo/serialize.hpp"

#include "tobo/error.hpp"

namespace tobo {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_to_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) rows.push_back(vector_to_json(M.row(i).transpose()));
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("matrix", "expected an array of rows");
    if (j.empty()) return Eigen::MatrixXd(0, 0);
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd M(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols) throw ConfigError("matrix", "ragged rows");
        M.row(static_cast<Eigen::Index>(i)) = vector_from_json(j[i]).transpose();
    }
    return M;
}

json to_json(const CoreTensorParam& core) {
    return std::visit(
        [](const auto& c) -> json {
            using C = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<C, FullCore>) {
                return {{"kind", "full"}, {"entries", vector_to_json(c.entries)}};
            } else if constexpr (std::is_same_v<C, CpCore>) {
                json f = json::array();
                for (const auto& v : c.factors) f.push_back(vector_to_json(v));
                return {{"kind", "cp"}, {"rank", c.rank}, {"factors", f}};
            } else {
                return {{"kind", "tt"}, {"ranks", c.ranks}, {"cores", c.cores}};
            }
        },
        core);
}

CoreTensorParam core_from_json(const json& j) {
    const CoreKind kind = core_kind_from_string(j.at("kind").get<std::string>());
    switch (kind) {
        case CoreKind::Full: return FullCore{vector_from_json(j.at("entries"))};
        case CoreKind::CP: {
            CpCore c;
            c.rank = j.at("rank").get<std::size_t>();
            for (const auto& f : j.at("factors")) c.factors.push_back(vector_from_json(f));
            return c;
        }
        case CoreKind::TT: {
            TtCore c;
            c.ranks = j.at("ranks").get<std::vector<std::size_t>>();
            c.cores = j.at("cores").get<std::vector<std::vector<double>>>();
            return c;
        }
    }
    throw ConfigError("core.kind", "unknown core kind");
}

json to_json(const TensorKernel& k) {
    json comps = json::array();
    for (const auto& c : k.components()) {
        json bases = json::array();
        for (const auto& b : c.bases)
            bases.push_back({{"family", to_string(b.family)}, {"lengthscales", vector_to_json(b.lengthscales)}});
        comps.push_back({{"core", to_json(c.core)}, {"bases", bases}});
    }
    return {{"kind", k.kind() == TensorKernel::Kind::Separable ? "separable" : "non_separable"},
            {"shape", k.shape().dims()},
            {"components", comps}};
}

TensorKernel kernel_from_json(const json& j) {
    const TensorShape shape(j.at("shape").get<std::vector<std::size_t>>());
    const std::string kind = j.at("kind").get<std::string>();
    std::vector<CoreTensorParam> cores;
    std::vector<std::vector<BaseKernel>> bases;
    for (const auto& c : j.at("components")) {
        cores.push_back(core_from_json(c.at("core")));
        std::vector<BaseKernel> bs;
        for (const auto& b : c.at("bases"))
            bs.push_back({base_family_from_string(b.at("family").get<std::string>()), vector_from_json(b.at("lengthscales"))});
        bases.push_back(std::move(bs));
    }
    if (kind == "separable") {
        if (cores.size() != 1 || bases[0].size() != 1)
            throw ConfigError("kernel.components", "a separable kernel has one component with one base kernel");
        return TensorKernel::separable(shape, std::move(cores[0]), std::move(bases[0][0]));
    }
    if (kind == "non_separable") return TensorKernel::non_separable(shape, std::move(cores), std::move(bases));
    throw ConfigError("kernel.kind", "unknown kernel kind '" + kind + "'");
}

json to_json(const TogpHyper& h) {
    return {{"kernel", to_json(h.kernel)},
            {"signal_variance", h.signal_variance},
            {"noise_variance", h.noise_variance},
            {"prior_mean", vector_to_json(h.mean_vector())}};
}

TogpHyper hyper_from_json(const json& j) {
    TogpHyper h;
    h.kernel = kernel_from_json(j.at("kernel"));
    h.signal_variance = j.at("signal_variance").get<double>();
    h.noise_variance = j.at("noise_variance").get<double>();
    if (j.contains("prior_mean")) h.prior_mean = vector_from_json(j.at("prior_mean"));
    h.validate();
    return h;
}

namespace {

json header() { return {{"schema", kSurrogateSchema}, {"version", kSurrogateSchemaVersion}}; }

}  // namespace

json surrogate_to_json(const TogpHyper& h, const Dataset& data) {
    json j = header();
    j["hyper"] = to_json(h);
    j["data"] = {{"X", matrix_to_json(data.X)}, {"Y", vector_to_json(data.Y)}};
    return j;
}

json surrogate_to_json(const TogpHyper& h, const PartialDataset& data) {
    json j = header();
    j["hyper"] = to_json(h);
    std::vector<std::string> sel;
    for (const auto& s : data.selections) sel.push_back(s.bitstring());
    j["data"] = {{"X", matrix_to_json(data.X)}, {"Y", vector_to_json(data.Y)}, {"k", data.k}, {"selections", sel}};
    return j;
}

LoadedSurrogate surrogate_from_json(const json& j) {
    if (j.value("schema", std::string()) != kSurrogateSchema)
        throw ConfigError("schema", std::string("expected '") + kSurrogateSchema + "'");
    if (j.value("version", 0) != kSurrogateSchemaVersion)
        throw ConfigError("version", "unsupported surrogate schema version");
    LoadedSurrogate out;
    out.hyper = hyper_from_json(j.at("hyper"));
    const auto& d = j.at("data");
    out.X = matrix_from_json(d.at("X"));
    out.Y = vector_from_json(d.at("Y"));
    const auto T = out.hyper.kernel.output_size();
    if (out.X.rows() == 0) out.X.resize(0, static_cast<Eigen::Index>(out.hyper.kernel.input_dim()));
    if (d.contains("selections")) {
        out.partial = true;
        out.k = d.at("k").get<std::size_t>();
        for (const auto& s : d.at("selections")) {
            const auto sel = SelectionVector::from_bitstring(s.get<std::string>());
            if (sel.size() != T || sel.k() != out.k) throw ConfigError("data.selections", "selection does not match T or k");
            out.entries.push_back(sel.indices());
        }
        if (out.entries.size() != static_cast<std::size_t>(out.X.rows()))
            throw ConfigError("data.selections", "one selection per row required");
    } else {
        out.entries = full_entries(static_cast<std::size_t>(out.X.rows()), T);
    }
    return out;
}

}  // namespace tobo
