#include <cmath>

#include <gtest/gtest.h>

#include "random_instances.hpp"
#include "tobo/kernels.hpp"
#include "tobo/linalg.hpp"

using namespace tobo;
using namespace tobo::testing;

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

}  // namespace

TEST(BaseKernel, ClosedForms) {
    const BaseKernel g{BaseFamily::Gaussian, scalar(1.0)};
    const BaseKernel m{BaseFamily::Matern52, scalar(1.0)};
    EXPECT_NEAR(g.eval(scalar(0), scalar(1)), std::exp(-0.5), 1e-15);
    EXPECT_NEAR(g.eval(scalar(0), scalar(1)), 0.60653, 1e-5);
    const double s5 = std::sqrt(5.0);
    EXPECT_NEAR(m.eval(scalar(0), scalar(1)), (1 + s5 + 5.0 / 3.0) * std::exp(-s5), 1e-15);
    EXPECT_NEAR(m.eval(scalar(0), scalar(1)), 0.52399, 1e-5);
    std::mt19937_64 rng(1);
    for (BaseFamily f : {BaseFamily::Gaussian, BaseFamily::Matern52}) {
        const BaseKernel k = random_base(rng, 3, f);
        const Eigen::VectorXd x = random_vector(rng, 3);
        EXPECT_EQ(k.eval(x, x), 1.0);
    }
}

TEST(BaseKernel, LengthscaleGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(2);
    for (BaseFamily f : {BaseFamily::Gaussian, BaseFamily::Matern52}) {
        BaseKernel k = random_base(rng, 3, f);
        const Eigen::VectorXd x = random_vector(rng, 3), xp = random_vector(rng, 3);
        Eigen::VectorXd g(3);
        k.lengthscale_gradient(x, xp, g);
        for (Eigen::Index q = 0; q < 3; ++q) {
            BaseKernel a = k, b = k;
            a.lengthscales(q) += 1e-6;
            b.lengthscales(q) -= 1e-6;
            EXPECT_LT(rel_err((a.eval(x, xp) - b.eval(x, xp)) / 2e-6, g(q), 1e-8), 1e-5);
        }
    }
}

TEST(TensorKernel, SeparableAtZeroLagIsRankOneLoading) {
    std::mt19937_64 rng(3);
    const TensorShape shape({2, 3});
    const TensorKernel k = random_kernel(rng, shape, 2, TensorKernel::Kind::Separable, CoreKind::CP);
    const Eigen::VectorXd x = random_vector(rng, 2);
    const Eigen::VectorXd a = k.loading(0);
    EXPECT_LT(max_abs(k.eval(x, x) - a * a.transpose()), 1e-15);
}

TEST(TensorKernel, ZeroCoresGiveZeroKernel) {
    const TensorShape shape({2, 2});
    std::vector<CoreTensorParam> cores(2, FullCore{Eigen::VectorXd::Zero(4)});
    std::vector<std::vector<BaseKernel>> bases(2, std::vector<BaseKernel>(2, BaseKernel{BaseFamily::Matern52, scalar(0.5)}));
    const TensorKernel k = TensorKernel::non_separable(shape, cores, bases);
    EXPECT_EQ(max_abs(k.eval(scalar(0.1), scalar(0.7))), 0.0);
}

TEST(TensorKernel, NonSeparableMatchesExplicitDoubleSum) {
    std::mt19937_64 rng(4);
    const TensorShape shape({2, 2});
    for (int trial = 0; trial < 10; ++trial) {
        const TensorKernel k = random_kernel(rng, shape, 3, TensorKernel::Kind::NonSeparable, CoreKind::Full);
        const Eigen::VectorXd x = random_vector(rng, 3), xp = random_vector(rng, 3);
        Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(4, 4);
        for (std::size_t l = 0; l < 2; ++l) {
            const auto& comp = k.components()[l];
            const Eigen::VectorXd a = std::get<FullCore>(comp.core).entries;
            for (const auto& b : comp.bases) {
                // Independent Matérn-5/2 evaluation.
                const double r = ((x - xp).array() / b.lengthscales.array()).matrix().norm();
                const double kv = (1 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) * std::exp(-std::sqrt(5.0) * r);
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j) expect(i, j) += a(i) * a(j) * kv;
            }
        }
        EXPECT_LT(max_abs(k.eval(x, xp) - expect), 1e-12);
    }
}

TEST(TensorKernel, SymmetryOnRandomPairs) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const TensorShape shape = random_shape(rng, 3, 12);
        const auto kind = trial % 2 ? TensorKernel::Kind::Separable : TensorKernel::Kind::NonSeparable;
        const TensorKernel k = random_kernel(rng, shape, 2, kind, static_cast<CoreKind>(trial % 3));
        const Eigen::VectorXd x = random_vector(rng, 2), xp = random_vector(rng, 2);
        EXPECT_LT(max_abs(k.eval(x, xp) - k.eval(xp, x).transpose()), 1e-12);
    }
}

TEST(Gram, SingleBlockAndKroneckerLayout) {
    std::mt19937_64 rng(6);
    const TensorShape shape({3, 2});
    const TensorKernel k = random_kernel(rng, shape, 2, TensorKernel::Kind::Separable, CoreKind::Full);
    const Eigen::MatrixXd X1 = random_inputs(rng, 1, 2);
    EXPECT_EQ(gram(k, X1), k.eval(X1.row(0).transpose(), X1.row(0).transpose()));

    const Eigen::MatrixXd X = random_inputs(rng, 5, 2);
    Eigen::MatrixXd Kx(5, 5);
    const auto& base = k.components()[0].bases[0];
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) Kx(i, j) = base.eval(X.row(i).transpose(), X.row(j).transpose());
    const Eigen::VectorXd a = k.loading(0);
    EXPECT_LT(max_abs(gram(k, X) - kron(Kx, a * a.transpose())), 1e-12);
}

TEST(Gram, PositiveSemidefiniteOnRandomConfigurations) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const TensorShape shape = random_shape(rng, 3, 12);
        const auto kind = trial % 2 ? TensorKernel::Kind::Separable : TensorKernel::Kind::NonSeparable;
        const TensorKernel k = random_kernel(rng, shape, 2, kind, static_cast<CoreKind>(trial % 3));
        const Eigen::MatrixXd X = random_inputs(rng, uniform_int(rng, 1, 6), 2);
        const Eigen::MatrixXd G = gram(k, X);
        EXPECT_LT(max_abs(G - G.transpose()), 1e-10);
        EXPECT_GE(min_eigenvalue(G), -1e-8);
        const Eigen::VectorXd v = random_vector(rng, static_cast<std::size_t>(G.rows()));
        EXPECT_GE(v.dot(G * v), -1e-8);
    }
}

TEST(KernelGrad, LengthscaleAtZeroLagIsZero) {
    std::mt19937_64 rng(8);
    const TensorKernel k = random_kernel(rng, TensorShape({2, 2}), 2, TensorKernel::Kind::NonSeparable, CoreKind::CP);
    const Eigen::VectorXd x = random_vector(rng, 2);
    for (std::size_t p = 0; p < k.num_lengthscales(); ++p) EXPECT_EQ(max_abs(k.grad(x, x, p)), 0.0);
}

TEST(KernelGrad, FullCoreEntryIsProductRule) {
    std::mt19937_64 rng(9);
    const TensorKernel k = random_kernel(rng, TensorShape({2, 2}), 1, TensorKernel::Kind::Separable, CoreKind::Full);
    const Eigen::VectorXd x = scalar(0.2), xp = scalar(0.9);
    const Eigen::VectorXd a = k.loading(0);
    const double kv = k.components()[0].bases[0].eval(x, xp);
    for (Eigen::Index p = 0; p < 4; ++p) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(4, p);
        const Eigen::MatrixXd expect = (e * a.transpose() + a * e.transpose()) * kv;
        EXPECT_LT(max_abs(k.grad(x, xp, k.num_lengthscales() + static_cast<std::size_t>(p)) - expect), 1e-14);
    }
}

TEST(KernelGrad, EveryParameterMatchesFiniteDifferences) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 12; ++trial) {
        const TensorShape shape = random_shape(rng, 3, 8);
        const auto kind = trial % 2 ? TensorKernel::Kind::Separable : TensorKernel::Kind::NonSeparable;
        const TensorKernel k = random_kernel(rng, shape, 2, kind, static_cast<CoreKind>(trial % 3));
        const Eigen::VectorXd x = random_vector(rng, 2), xp = random_vector(rng, 2);
        const Eigen::VectorXd p = k.params();
        for (std::size_t q = 0; q < k.num_params(); ++q) {
            // Five-point stencil keeps roundoff small on entries far below the matrix scale.
            auto at = [&](double h) {
                TensorKernel t = k;
                Eigen::VectorXd v = p;
                v(static_cast<Eigen::Index>(q)) += h;
                t.set_params(v);
                return Eigen::MatrixXd(t.eval(x, xp));
            };
            const double h = 1e-4;
            const Eigen::MatrixXd fd = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
            const Eigen::MatrixXd an = k.grad(x, xp, q);
            for (Eigen::Index i = 0; i < fd.size(); ++i)
                if (std::abs(an.data()[i]) > 1e-8) EXPECT_LT(rel_err(fd.data()[i], an.data()[i]), 1e-4) << k.param_ids()[q].name() << " fd " << fd.data()[i] << " an " << an.data()[i] << " scale " << max_abs(an);
        }
    }
}

TEST(KernelGrad, ContractionMatchesExplicitTraces) {
    std::mt19937_64 rng(12);
    const TensorShape shape({2, 2});
    for (auto kind : {TensorKernel::Kind::Separable, TensorKernel::Kind::NonSeparable}) {
        const TensorKernel k = random_kernel(rng, shape, 2, kind, CoreKind::TT);
        const Eigen::MatrixXd X = random_inputs(rng, 3, 2);
        Eigen::MatrixXd W = Eigen::MatrixXd::Random(12, 12);
        W = symmetrize(W);
        const Eigen::VectorXd g = contract_gram_gradient(k, X, W);
        for (std::size_t q = 0; q < k.num_params(); ++q) {
            Eigen::MatrixXd dK(12, 12);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) dK.block(i * 4, j * 4, 4, 4) = k.grad(X.row(i).transpose(), X.row(j).transpose(), q);
            EXPECT_NEAR(g(static_cast<Eigen::Index>(q)), (W * dK).trace(), 1e-10);
        }
    }
}

TEST(InputDomain, BoxOperations) {
    const InputDomain box(Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 2));
    EXPECT_TRUE(box.contains(Eigen::Vector2d(0, 1)));
    EXPECT_FALSE(box.contains(Eigen::Vector2d(2, 1)));
    EXPECT_EQ(box.clamp(Eigen::Vector2d(2, -1)), Eigen::Vector2d(1, 0));
    EXPECT_EQ(box.from_unit(Eigen::Vector2d(0.5, 0.25)), Eigen::Vector2d(0, 0.5));
}
