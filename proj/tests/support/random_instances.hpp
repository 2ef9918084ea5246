#pragma once

// Random kernels, hyperparameters and data shared by the unit and acceptance tests.

#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tobo/kernels.hpp"
#include "tobo/ptogp.hpp"
#include "tobo/sampling.hpp"
#include "tobo/togp.hpp"

namespace tobo::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

inline std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

/// Random shape with at most max_modes modes and at most max_total entries.
inline TensorShape random_shape(std::mt19937_64& rng, std::size_t max_modes, std::size_t max_total) {
    const std::size_t m = uniform_int(rng, 1, max_modes);
    std::vector<std::size_t> dims;
    std::size_t total = 1;
    for (std::size_t l = 0; l < m; ++l) {
        const std::size_t cap = std::max<std::size_t>(1, std::min<std::size_t>(4, max_total / total));
        dims.push_back(uniform_int(rng, 1, cap));
        total *= dims.back();
    }
    return TensorShape(dims);
}

inline CoreSpec random_spec(std::mt19937_64& rng, CoreKind kind, const TensorShape& shape) {
    CoreSpec s;
    s.kind = kind;
    s.cp_rank = uniform_int(rng, 1, 2);
    s.tt_ranks.assign(shape.modes() + 1, 1);
    for (std::size_t j = 1; j < shape.modes(); ++j) s.tt_ranks[j] = uniform_int(rng, 1, 2);
    return s;
}

inline BaseKernel random_base(std::mt19937_64& rng, std::size_t d, BaseFamily family) {
    Eigen::VectorXd ls(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < ls.size(); ++i) ls(i) = uniform(rng, 0.4, 1.5);
    return {family, ls};
}

inline TensorKernel random_kernel(std::mt19937_64& rng, const TensorShape& shape, std::size_t d,
                                  TensorKernel::Kind kind, CoreKind core, BaseFamily family = BaseFamily::Matern52) {
    const CoreSpec spec = random_spec(rng, core, shape);
    if (kind == TensorKernel::Kind::Separable)
        return TensorKernel::separable(shape, random_core(spec, shape, rng), random_base(rng, d, family));
    std::vector<CoreTensorParam> cores;
    std::vector<std::vector<BaseKernel>> bases;
    for (std::size_t l = 0; l < shape.modes(); ++l) {
        cores.push_back(random_core(spec, shape, rng));
        std::vector<BaseKernel> bl;
        for (std::size_t j = 0; j < shape.dim(l); ++j) bl.push_back(random_base(rng, d, family));
        bases.push_back(std::move(bl));
    }
    return TensorKernel::non_separable(shape, std::move(cores), std::move(bases));
}

inline Eigen::MatrixXd random_inputs(std::mt19937_64& rng, std::size_t n, std::size_t d) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = unit_uniform(rng);
    return X;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
    return v;
}

inline TogpHyper random_hyper(std::mt19937_64& rng, TensorKernel kernel) {
    TogpHyper h;
    const std::size_t T = kernel.output_size();
    h.kernel = std::move(kernel);
    h.signal_variance = uniform(rng, 0.5, 2.0);
    h.noise_variance = uniform(rng, 0.05, 0.5);
    h.prior_mean = random_vector(rng, T, 0.5);
    return h;
}

inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t T) {
    return {random_inputs(rng, n, d), random_vector(rng, n * T)};
}

inline SelectionVector random_selection(std::mt19937_64& rng, std::size_t T, std::size_t k) {
    std::vector<Eigen::Index> idx(T);
    for (std::size_t i = 0; i < T; ++i) idx[i] = static_cast<Eigen::Index>(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return SelectionVector::from_indices(T, idx);
}

inline PartialDataset random_partial_data(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t T,
                                          std::size_t k) {
    PartialDataset data;
    data.X = random_inputs(rng, n, d);
    data.k = k;
    for (std::size_t i = 0; i < n; ++i) data.selections.push_back(random_selection(rng, T, k));
    data.Y = random_vector(rng, n * k);
    return data;
}

inline double max_abs(const Eigen::MatrixXd& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

/// Relative error with an absolute floor for components near zero.
inline double rel_err(double a, double b, double floor = 1e-6) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor}); }

}  // namespace tobo::testing

namespace tobo::testing {

/// Central differences of f over [tau^2, sigma^2, kernel params...], matching HyperGradient::flat().
inline Eigen::VectorXd fd_hyper_gradient(const std::function<double(const TogpHyper&)>& f, const TogpHyper& h,
                                         double step = 1e-6) {
    const Eigen::VectorXd kp = h.kernel.params();
    Eigen::VectorXd out(2 + kp.size());
    auto perturbed = [&](Eigen::Index i, double delta) {
        TogpHyper t = h;
        if (i == 0) {
            t.noise_variance += delta;
        } else if (i == 1) {
            t.signal_variance += delta;
        } else {
            Eigen::VectorXd p = kp;
            p(i - 2) += delta;
            t.kernel.set_params(p);
        }
        return f(t);
    };
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = (perturbed(i, step) - perturbed(i, -step)) / (2 * step);
    return out;
}

}  // namespace tobo::testing
