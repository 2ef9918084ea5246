#pragma once

#include <functional>
#include <random>

#include <Eigen/Dense>

#include "tobo/kernels.hpp"
#include "tobo/ptogp.hpp"
#include "tobo/tensor.hpp"

namespace tobo {

/// Black-box tensor-output objective on a box domain.
class TensorProblem {
public:
    virtual ~TensorProblem() = default;

    virtual const TensorShape& shape() const = 0;
    virtual const InputDomain& domain() const = 0;
    virtual double noise_std() const = 0;
    /// Noiseless vec(f(x)).
    virtual Eigen::VectorXd truth(const Eigen::VectorXd& x) const = 0;

    std::size_t output_size() const { return shape().total(); }

    /// vec(f(x)) plus i.i.d. N(0, noise_std^2) noise on every entry.
    Eigen::VectorXd evaluate(const Eigen::VectorXd& x, std::mt19937_64& rng) const {
        Eigen::VectorXd y = truth(x);
        if (noise_std() > 0.0) {
            std::normal_distribution<double> eps(0.0, noise_std());
            for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += eps(rng);
        }
        return y;
    }

    /// Noisy selected entries. Draws the full noise vector so the noise stream
    /// advances identically whatever the selection.
    Eigen::VectorXd evaluate_partial(const Eigen::VectorXd& x, const SelectionVector& lambda,
                                     std::mt19937_64& rng) const {
        return evaluate(x, rng)(lambda.indices());
    }
};

/// Problem defined by a callable.
class FunctionProblem final : public TensorProblem {
public:
    using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

    FunctionProblem(TensorShape shape, InputDomain domain, Fn f, double noise_std = 0.0)
        : shape_(std::move(shape)), domain_(std::move(domain)), f_(std::move(f)), noise_std_(noise_std) {}

    const TensorShape& shape() const override { return shape_; }
    const InputDomain& domain() const override { return domain_; }
    double noise_std() const override { return noise_std_; }
    Eigen::VectorXd truth(const Eigen::VectorXd& x) const override { return f_(x); }

private:
    TensorShape shape_;
    InputDomain domain_;
    Fn f_;
    double noise_std_;
};

}  // namespace tobo
