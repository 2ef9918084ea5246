#include "tobo/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include "tobo/error.hpp"

namespace tobo {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;

void check_dims(const BaseKernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
    if (x.size() != k.lengthscales.size() || xp.size() != k.lengthscales.size())
        throw ShapeError("base kernel expects inputs of dimension " + std::to_string(k.lengthscales.size()));
}

}  // namespace

std::string to_string(BaseFamily f) {
    return f == BaseFamily::Matern52 ? "matern52" : "gaussian";
}

BaseFamily base_family_from_string(const std::string& s) {
    if (s == "matern52") return BaseFamily::Matern52;
    if (s == "gaussian") return BaseFamily::Gaussian;
    throw std::invalid_argument("unknown base kernel '" + s + "' (expected matern52 or gaussian)");
}

double BaseKernel::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const {
    check_dims(*this, x, xp);
    const double r2 = ((x - xp).array() / lengthscales.array()).square().sum();
    if (family == BaseFamily::Gaussian) return std::exp(-0.5 * r2);
    const double r = std::sqrt(r2);
    return (1.0 + kSqrt5 * r + 5.0 / 3.0 * r2) * std::exp(-kSqrt5 * r);
}

void BaseKernel::lengthscale_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                                      Eigen::Ref<Eigen::VectorXd> out) const {
    check_dims(*this, x, xp);
    const Eigen::ArrayXd diff2 = (x - xp).array().square();
    const Eigen::ArrayXd theta3 = lengthscales.array().cube();
    const double r2 = (diff2 / lengthscales.array().square()).sum();
    double factor = 0.0;
    if (family == BaseFamily::Gaussian) {
        factor = std::exp(-0.5 * r2);
    } else {
        const double r = std::sqrt(r2);
        factor = 5.0 / 3.0 * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
    }
    out = (factor * diff2 / theta3).matrix();
}

double base_eval(const BaseKernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& xp) { return k.eval(x, xp); }

InputDomain::InputDomain(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() == 0) throw ShapeError("domain bounds must have equal positive size");
    if (!(lower.array() < upper.array()).all()) throw ShapeError("domain requires lower < upper elementwise");
}

InputDomain InputDomain::unit_cube(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    return InputDomain(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n));
}

bool InputDomain::contains(const Eigen::VectorXd& x, double tol) const {
    return x.size() == lower.size() && (x.array() >= lower.array() - tol).all() &&
           (x.array() <= upper.array() + tol).all();
}

Eigen::VectorXd InputDomain::clamp(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

Eigen::VectorXd InputDomain::from_unit(const Eigen::VectorXd& u) const {
    return lower.array() + u.array() * (upper - lower).array();
}

std::string KernelParamId::name() const {
    if (type == Type::Lengthscale)
        return "theta[" + std::to_string(component) + "][" + std::to_string(base) + "][" + std::to_string(index) + "]";
    return "core[" + std::to_string(component) + "][" + std::to_string(index) + "]";
}

TensorKernel TensorKernel::separable(TensorShape shape, CoreTensorParam core, BaseKernel base) {
    if (base.lengthscales.size() == 0) throw ShapeError("base kernel needs at least one lengthscale");
    TensorKernel k;
    k.kind_ = Kind::Separable;
    k.shape_ = std::move(shape);
    k.input_dim_ = base.input_dim();
    k.components_.push_back(KernelComponent{std::move(core), {std::move(base)}});
    k.refresh();
    return k;
}

TensorKernel TensorKernel::non_separable(TensorShape shape, std::vector<CoreTensorParam> cores,
                                         std::vector<std::vector<BaseKernel>> bases) {
    const std::size_t m = shape.modes();
    if (cores.size() != m) throw ShapeError("non-separable kernel needs exactly one core per mode");
    if (bases.size() != m) throw ShapeError("non-separable kernel needs base kernels for every mode");
    TensorKernel k;
    k.kind_ = Kind::NonSeparable;
    k.shape_ = std::move(shape);
    for (std::size_t l = 0; l < m; ++l) {
        if (bases[l].size() != k.shape_.dim(l))
            throw ShapeError("mode " + std::to_string(l) + " needs exactly t_l = " + std::to_string(k.shape_.dim(l)) +
                             " base kernels");
        k.components_.push_back(KernelComponent{std::move(cores[l]), std::move(bases[l])});
    }
    k.input_dim_ = k.components_.front().bases.front().input_dim();
    if (k.input_dim_ == 0) throw ShapeError("base kernel needs at least one lengthscale");
    k.refresh();
    return k;
}

void TensorKernel::refresh() {
    loadings_.clear();
    num_lengthscales_ = 0;
    num_core_params_ = 0;
    for (const auto& comp : components_) {
        for (const auto& b : comp.bases) {
            if (b.input_dim() != input_dim_) throw ShapeError("all base kernels must share the input dimension");
            if (!(b.lengthscales.array() > 0.0).all()) throw ShapeError("lengthscales must be positive");
            num_lengthscales_ += b.input_dim();
        }
        loadings_.push_back(materialize_core(comp.core, shape_));
        num_core_params_ += param_count(comp.core);
    }
}

double TensorKernel::component_base(std::size_t c, const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const {
    double s = 0.0;
    for (const auto& b : components_[c].bases) s += b.eval(x, xp);
    return s;
}

Eigen::MatrixXd TensorKernel::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const {
    const auto T = static_cast<Eigen::Index>(output_size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T, T);
    for (std::size_t c = 0; c < components_.size(); ++c) {
        const double kap = component_base(c, x, xp);
        out.noalias() += kap * loadings_[c] * loadings_[c].transpose();
    }
    return out;
}

Eigen::VectorXd TensorKernel::params() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(num_params()));
    Eigen::Index pos = 0;
    for (const auto& comp : components_)
        for (const auto& b : comp.bases) {
            p.segment(pos, b.lengthscales.size()) = b.lengthscales;
            pos += b.lengthscales.size();
        }
    for (const auto& comp : components_) {
        const Eigen::VectorXd cp = core_params(comp.core);
        p.segment(pos, cp.size()) = cp;
        pos += cp.size();
    }
    return p;
}

void TensorKernel::set_params(const Eigen::VectorXd& p) {
    if (static_cast<std::size_t>(p.size()) != num_params()) throw ShapeError("kernel parameter vector has wrong length");
    Eigen::Index pos = 0;
    for (auto& comp : components_)
        for (auto& b : comp.bases) {
            b.lengthscales = p.segment(pos, b.lengthscales.size());
            pos += b.lengthscales.size();
        }
    for (auto& comp : components_) {
        const auto n = static_cast<Eigen::Index>(param_count(comp.core));
        set_core_params(comp.core, p.segment(pos, n));
        pos += n;
    }
    refresh();
}

std::vector<KernelParamId> TensorKernel::param_ids() const {
    std::vector<KernelParamId> ids;
    ids.reserve(num_params());
    for (std::size_t c = 0; c < components_.size(); ++c)
        for (std::size_t b = 0; b < components_[c].bases.size(); ++b)
            for (std::size_t q = 0; q < input_dim_; ++q)
                ids.push_back({KernelParamId::Type::Lengthscale, c, b, q});
    for (std::size_t c = 0; c < components_.size(); ++c)
        for (std::size_t q = 0; q < param_count(components_[c].core); ++q)
            ids.push_back({KernelParamId::Type::Core, c, 0, q});
    return ids;
}

double TensorKernel::normalize_component(std::size_t c) {
    const double n2 = loadings_.at(c).squaredNorm();
    if (n2 <= 0.0) return 0.0;
    scale_core(components_[c].core, shape_.modes(), 1.0 / std::sqrt(n2));
    refresh();
    return n2;
}

Eigen::MatrixXd TensorKernel::grad(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, std::size_t which) const {
    const auto ids = param_ids();
    if (which >= ids.size())
        throw std::out_of_range("kernel has " + std::to_string(ids.size()) + " hyperparameters, requested " +
                                std::to_string(which));
    const auto& id = ids[which];
    const Eigen::VectorXd& a = loadings_[id.component];
    if (id.type == KernelParamId::Type::Lengthscale) {
        Eigen::VectorXd g(static_cast<Eigen::Index>(input_dim_));
        components_[id.component].bases[id.base].lengthscale_gradient(x, xp, g);
        return g(static_cast<Eigen::Index>(id.index)) * a * a.transpose();
    }
    const Eigen::MatrixXd jac = core_jacobian(components_[id.component].core, shape_);
    const Eigen::VectorXd j = jac.col(static_cast<Eigen::Index>(id.index));
    return component_base(id.component, x, xp) * (j * a.transpose() + a * j.transpose());
}

Eigen::MatrixXd kernel_eval(const TensorKernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
    return k.eval(x, xp);
}

Eigen::MatrixXd gram(const TensorKernel& k, const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    const auto T = static_cast<Eigen::Index>(k.output_size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * T, n * T);
    for (std::size_t c = 0; c < k.components().size(); ++c) {
        const Eigen::MatrixXd B = k.loading(c) * k.loading(c).transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd xi = X.row(i).transpose();
            for (Eigen::Index j = i; j < n; ++j) {
                const double kap = k.component_base(c, xi, X.row(j).transpose());
                out.block(i * T, j * T, T, T) += kap * B;
            }
        }
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j) out.block(i * T, j * T, T, T) = out.block(j * T, i * T, T, T).transpose();
    return out;
}

Eigen::MatrixXd cross_gram(const TensorKernel& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& x) {
    const Eigen::Index n = X.rows();
    const auto T = static_cast<Eigen::Index>(k.output_size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * T, T);
    for (std::size_t c = 0; c < k.components().size(); ++c) {
        const Eigen::MatrixXd B = k.loading(c) * k.loading(c).transpose();
        for (Eigen::Index i = 0; i < n; ++i)
            out.block(i * T, 0, T, T) += k.component_base(c, X.row(i).transpose(), x) * B;
    }
    return out;
}

Eigen::MatrixXd kernel_grad(const TensorKernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                            std::size_t which) {
    return k.grad(x, xp, which);
}

Eigen::VectorXd contract_gram_gradient(const TensorKernel& k, const Eigen::MatrixXd& X, const Eigen::MatrixXd& W) {
    const Eigen::Index n = X.rows();
    const auto T = static_cast<Eigen::Index>(k.output_size());
    if (W.rows() != n * T || W.cols() != n * T) throw ShapeError("contraction weight has wrong size");
    const auto d = static_cast<Eigen::Index>(k.input_dim());

    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k.num_params()));
    Eigen::Index ls_pos = 0;
    Eigen::Index core_pos = static_cast<Eigen::Index>(k.num_lengthscales());
    Eigen::VectorXd g(d);

    for (std::size_t c = 0; c < k.components().size(); ++c) {
        const auto& comp = k.components()[c];
        const Eigen::VectorXd& a = k.loading(c);

        // S[i,j] = a^T W_ij a and M = sum_ij kappa(i,j) W_ij.
        Eigen::MatrixXd S(n, n);
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(T, T);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                const auto blk = W.block(i * T, j * T, T, T);
                S(i, j) = a.dot(blk * a);
                double kap = 0.0;
                for (const auto& b : comp.bases) kap += b.eval(X.row(i).transpose(), X.row(j).transpose());
                M.noalias() += kap * blk;
            }

        for (const auto& b : comp.bases) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (i == j) continue;  // zero lag contributes nothing
                    b.lengthscale_gradient(X.row(i).transpose(), X.row(j).transpose(), g);
                    acc += S(i, j) * g;
                }
            out.segment(ls_pos, d) = acc;
            ls_pos += d;
        }

        const Eigen::MatrixXd jac = core_jacobian(comp.core, k.shape());
        const Eigen::VectorXd core_grad = jac.transpose() * ((M + M.transpose()) * a);
        out.segment(core_pos, core_grad.size()) = core_grad;
        core_pos += core_grad.size();
    }
    return out;
}

}  // namespace tobo
