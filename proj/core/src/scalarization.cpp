#include "tobo/scalarization.hpp"

#include <cmath>
#include <numeric>

#include "tobo/error.hpp"

namespace tobo {

void Scalarization::validate(std::size_t T) const {
    if (kind == Kind::Sum) return;
    if (static_cast<std::size_t>(weights.size()) != T)
        throw ConfigError("scalarization.weights", "expected " + std::to_string(T) + " weights, got " +
                                                       std::to_string(weights.size()));
    if (!weights.allFinite()) throw ConfigError("scalarization.weights", "weights must be finite");
    if (kind == Kind::ExpWeighted && !(p > 0.0 && std::isfinite(p)))
        throw ConfigError("scalarization.p", "p must be positive");
}

double Scalarization::operator()(const Eigen::VectorXd& v) const {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(v.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    return partial(v, all);
}

double Scalarization::partial(const Eigen::VectorXd& values, std::span<const Eigen::Index> entries) const {
    if (static_cast<std::size_t>(values.size()) != entries.size())
        throw ShapeError("scalarization received " + std::to_string(values.size()) + " values for " +
                         std::to_string(entries.size()) + " entries");
    if (kind != Kind::Sum)
        for (auto e : entries)
            if (e < 0 || e >= weights.size()) throw ShapeError("scalarization weight index out of range");
    double s = 0.0;
    for (std::size_t j = 0; j < entries.size(); ++j) {
        const double v = values(static_cast<Eigen::Index>(j));
        switch (kind) {
            case Kind::Sum: s += v; break;
            case Kind::WeightedSum: s += weights(entries[j]) * v; break;
            case Kind::ExpWeighted: s += std::exp(p * weights(entries[j]) - 1.0) * std::exp(p * v); break;
        }
    }
    return s;
}

std::string to_string(Scalarization::Kind k) {
    switch (k) {
        case Scalarization::Kind::Sum: return "sum";
        case Scalarization::Kind::WeightedSum: return "weighted_sum";
        case Scalarization::Kind::ExpWeighted: return "exp_weighted";
    }
    return "sum";
}

Scalarization::Kind scalarization_kind_from_string(const std::string& s) {
    if (s == "sum") return Scalarization::Kind::Sum;
    if (s == "weighted_sum") return Scalarization::Kind::WeightedSum;
    if (s == "exp_weighted") return Scalarization::Kind::ExpWeighted;
    throw ConfigError("scalarization.kind", "unknown scalarization '" + s + "' (sum, weighted_sum, exp_weighted)");
}

}  // namespace tobo
