#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tobo {

/// Maps a (possibly partial) tensor output to a scalar objective.
///
///   Sum:          sum_i v_i
///   WeightedSum:  sum_i w_i v_i
///   ExpWeighted:  sum_i exp(p w_i - 1) exp(p v_i)
struct Scalarization {
    enum class Kind { Sum, WeightedSum, ExpWeighted };

    Kind kind = Kind::Sum;
    Eigen::VectorXd weights;  // length T for the weighted variants
    double p = 1.0;

    static Scalarization sum() { return {}; }
    static Scalarization weighted_sum(Eigen::VectorXd w) { return {Kind::WeightedSum, std::move(w), 1.0}; }
    static Scalarization exp_weighted(Eigen::VectorXd w, double p) { return {Kind::ExpWeighted, std::move(w), p}; }

    /// Throws ConfigError when the weights do not fit a tensor of size T or p <= 0.
    void validate(std::size_t T) const;

    /// Full output vector of length T.
    double operator()(const Eigen::VectorXd& v) const;
    /// values[j] is entry entries[j] of the tensor.
    double partial(const Eigen::VectorXd& values, std::span<const Eigen::Index> entries) const;
};

std::string to_string(Scalarization::Kind k);
Scalarization::Kind scalarization_kind_from_string(const std::string& s);

}  // namespace tobo
