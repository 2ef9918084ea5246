#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tobo/core_tensor.hpp"
#include "tobo/tensor.hpp"

namespace tobo {

enum class BaseFamily { Matern52, Gaussian };

std::string to_string(BaseFamily f);
BaseFamily base_family_from_string(const std::string& s);

/// Stationary input kernel with per-dimension (ARD) lengthscales and unit variance.
struct BaseKernel {
    BaseFamily family = BaseFamily::Matern52;
    Eigen::VectorXd lengthscales;

    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(lengthscales.size()); }

    double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const;

    /// d eval / d lengthscale_q for every q, written into out (length d).
    void lengthscale_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                              Eigen::Ref<Eigen::VectorXd> out) const;
};

double base_eval(const BaseKernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& xp);

/// Box [lower, upper] in R^d.
struct InputDomain {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    InputDomain() = default;
    InputDomain(Eigen::VectorXd lo, Eigen::VectorXd hi);

    static InputDomain unit_cube(std::size_t d);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(lower.size()); }
    bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
    Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
    /// Maps a point of [0,1]^d into the box.
    Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const;
};

/// One term vec(A) vec(A)^T * sum_b k_b(x, x') of a tensor-output kernel.
struct KernelComponent {
    CoreTensorParam core;
    std::vector<BaseKernel> bases;
};

/// Identifies one scalar hyperparameter of a TensorKernel.
struct KernelParamId {
    enum class Type { Lengthscale, Core } type = Type::Lengthscale;
    std::size_t component = 0;
    std::size_t base = 0;   // Lengthscale only
    std::size_t index = 0;  // input dimension, or core parameter index

    std::string name() const;
};

/// Tensor-output covariance K(x, x') in R^{T x T}.
///
/// Separable:      vec(A) vec(A)^T k(x, x').
/// Non-separable:  sum_{l=1..m} sum_{j=1..t_l} vec(A_l) vec(A_l)^T k_{lj}(x, x').
///
/// Both are stored as a list of components; the separable kernel has exactly
/// one component with one base kernel. Materialized loadings vec(A_c) are
/// cached and refreshed by set_params().
class TensorKernel {
public:
    enum class Kind { Separable, NonSeparable };

    TensorKernel() = default;

    static TensorKernel separable(TensorShape shape, CoreTensorParam core, BaseKernel base);
    static TensorKernel non_separable(TensorShape shape, std::vector<CoreTensorParam> cores,
                                      std::vector<std::vector<BaseKernel>> bases);

    Kind kind() const noexcept { return kind_; }
    const TensorShape& shape() const noexcept { return shape_; }
    std::size_t output_size() const noexcept { return shape_.total(); }
    std::size_t input_dim() const noexcept { return input_dim_; }
    const std::vector<KernelComponent>& components() const noexcept { return components_; }
    const Eigen::VectorXd& loading(std::size_t c) const { return loadings_.at(c); }

    /// Sum of the component's base kernels at (x, x').
    double component_base(std::size_t c, const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const;

    Eigen::MatrixXd eval(const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const;

    std::size_t num_lengthscales() const noexcept { return num_lengthscales_; }
    std::size_t num_core_params() const noexcept { return num_core_params_; }
    std::size_t num_params() const noexcept { return num_lengthscales_ + num_core_params_; }

    /// Lengthscales first (component, base, dimension order), then core parameters (component order).
    Eigen::VectorXd params() const;
    void set_params(const Eigen::VectorXd& p);
    std::vector<KernelParamId> param_ids() const;

    /// Rescales component c's core so that its loading vector has unit norm;
    /// returns the squared norm that was removed.
    double normalize_component(std::size_t c);

    /// Analytic dK(x, x')/dp for parameter index `which` into params().
    Eigen::MatrixXd grad(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, std::size_t which) const;

private:
    void refresh();

    Kind kind_ = Kind::Separable;
    TensorShape shape_;
    std::size_t input_dim_ = 0;
    std::vector<KernelComponent> components_;
    std::vector<Eigen::VectorXd> loadings_;
    std::size_t num_lengthscales_ = 0;
    std::size_t num_core_params_ = 0;
};

Eigen::MatrixXd kernel_eval(const TensorKernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& xp);

/// n T x n T block matrix with (i, j) block K(x_i, x_j); rows of X are inputs.
Eigen::MatrixXd gram(const TensorKernel& k, const Eigen::MatrixXd& X);

/// n T x T block column with i-th block K(x_i, x).
Eigen::MatrixXd cross_gram(const TensorKernel& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& x);

Eigen::MatrixXd kernel_grad(const TensorKernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                            std::size_t which);

/// For symmetric W (n T x n T), returns g_p = tr(W dK_n/dp) for every kernel
/// parameter p without forming the derivative matrices.
Eigen::VectorXd contract_gram_gradient(const TensorKernel& k, const Eigen::MatrixXd& X, const Eigen::MatrixXd& W);

}  // namespace tobo
