#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tobo/tensor.hpp"

namespace tobo {

/// All T entries stored verbatim in canonical order.
struct FullCore {
    Eigen::VectorXd entries;
};

/// A = sum_r a_{r,1} o a_{r,2} o ... o a_{r,m}. Factors are unnormalized.
/// factors[r * m + i] has length t_i.
struct CpCore {
    std::size_t rank = 1;
    std::vector<Eigen::VectorXd> factors;
};

/// Tensor-train cores G_j of shape r_{j-1} x t_j x r_j with r_0 = r_m = 1.
/// Each core is contiguous with index a + r_{j-1} * (i + t_j * b).
struct TtCore {
    std::vector<std::size_t> ranks;  // m + 1 entries
    std::vector<std::vector<double>> cores;
};

using CoreTensorParam = std::variant<FullCore, CpCore, TtCore>;

enum class CoreKind { Full, CP, TT };

std::string to_string(CoreKind kind);
CoreKind core_kind_from_string(const std::string& s);

/// Rank configuration used to build or compare core parametrizations.
struct CoreSpec {
    CoreKind kind = CoreKind::Full;
    std::size_t cp_rank = 1;
    std::vector<std::size_t> tt_ranks;  // m + 1 entries, boundaries 1

    bool operator==(const CoreSpec&) const = default;
};

/// Throws ShapeError if p does not fit shape.
void validate_core(const CoreTensorParam& p, const TensorShape& shape);

/// vec() of the reconstructed core tensor.
Eigen::VectorXd materialize_core(const CoreTensorParam& p, const TensorShape& shape);

std::size_t param_count(const CoreTensorParam& p);

/// d vec(A) / d params, a T x param_count matrix. Parameter order matches core_params().
Eigen::MatrixXd core_jacobian(const CoreTensorParam& p, const TensorShape& shape);

Eigen::VectorXd core_params(const CoreTensorParam& p);
void set_core_params(CoreTensorParam& p, const Eigen::VectorXd& values);

/// Multiplies the materialized tensor by c (c > 0) by rescaling every factor.
void scale_core(CoreTensorParam& p, std::size_t modes, double c);

CoreKind kind_of(const CoreTensorParam& p);
CoreSpec spec_of(const CoreTensorParam& p);

/// Deterministic near-uniform core of unit Frobenius norm with the given layout.
CoreTensorParam uniform_core(const CoreSpec& spec, const TensorShape& shape);

/// Random core with i.i.d. N(0, scale^2) parameters.
CoreTensorParam random_core(const CoreSpec& spec, const TensorShape& shape, std::mt19937_64& rng,
                            double scale = 1.0);

}  // namespace tobo
