#include <cmath>

#include <gtest/gtest.h>

#include "random_instances.hpp"
#include "tobo/error.hpp"
#include "tobo/linalg.hpp"
#include "tobo/oracles.hpp"
#include "tobo/togp.hpp"

using namespace tobo;
using namespace tobo::testing;

namespace {

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

TogpHyper scalar_hyper(double s2, double t2) {
    TogpHyper h;
    h.kernel = TensorKernel::separable(TensorShape({1}), FullCore{scalar(1.0)}, BaseKernel{BaseFamily::Matern52, scalar(0.01)});
    h.signal_variance = s2;
    h.noise_variance = t2;
    return h;
}

/// Draws Y ~ N(mu, sigma^2 K_n + tau^2 I) at X.
Eigen::VectorXd sample_outputs(std::mt19937_64& rng, const TogpHyper& h, const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd G = gram(h.kernel, X);
    const Eigen::MatrixXd S = h.signal_variance * G + h.noise_variance * Eigen::MatrixXd::Identity(G.rows(), G.cols());
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    const Eigen::VectorXd z = random_vector(rng, static_cast<std::size_t>(G.rows()));
    Eigen::VectorXd mu = h.mean_vector().replicate(X.rows(), 1);
    return mu + llt.matrixL() * z;
}

}  // namespace

TEST(TogpPosterior, EmptyDataIsPrior) {
    std::mt19937_64 rng(1);
    const TogpHyper h = random_hyper(rng, random_kernel(rng, TensorShape({2, 2}), 2, TensorKernel::Kind::Separable, CoreKind::Full));
    const Dataset empty{Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)};
    const Eigen::VectorXd x = random_vector(rng, 2);
    const Posterior p = posterior(h, empty, x);
    EXPECT_LT(max_abs(p.mean - h.mean_vector()), 1e-15);
    EXPECT_LT(max_abs(p.cov - h.signal_variance * h.kernel.eval(x, x)), 1e-14);
}

TEST(TogpPosterior, NearNoiselessInterpolation) {
    std::mt19937_64 rng(2);
    TogpHyper h = random_hyper(rng, random_kernel(rng, TensorShape({3}), 2, TensorKernel::Kind::NonSeparable, CoreKind::Full));
    h.signal_variance = 1.0;
    h.noise_variance = 1e-12;
    h.prior_mean = Eigen::VectorXd::Zero(3);
    // K(x, x) has rank at most m, so the observation is drawn from its range.
    Dataset data{random_inputs(rng, 1, 2), Eigen::VectorXd()};
    const Eigen::VectorXd x1 = data.X.row(0).transpose();
    data.Y = h.kernel.eval(x1, x1) * random_vector(rng, 3);
    const Posterior p = posterior(h, data, x1);
    EXPECT_LT(max_abs(p.mean - data.Y), 1e-4);
}

TEST(TogpPosterior, MatchesJointConditioningOracle) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const TensorShape shape = random_shape(rng, 3, 8);
        const auto kind = trial % 2 ? TensorKernel::Kind::Separable : TensorKernel::Kind::NonSeparable;
        const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, kind, static_cast<CoreKind>(trial % 3)));
        const Dataset data = random_dataset(rng, 4, 2, shape.total());
        const Eigen::VectorXd x = random_vector(rng, 2);
        const Posterior fast = posterior(h, data, x);
        const Posterior ref = joint_conditioning_posterior(h, data.X, full_entries(4, shape.total()), data.Y, x);
        EXPECT_LT(max_abs(fast.mean - ref.mean), 1e-8);
        EXPECT_LT(max_abs(fast.cov - ref.cov), 1e-8);
    }
}

TEST(TogpPosterior, VarianceShrinksOnNestedData) {
    std::mt19937_64 rng(4);
    const TensorShape shape({2, 2});
    const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, TensorKernel::Kind::NonSeparable, CoreKind::CP));
    const Dataset big = random_dataset(rng, 6, 2, 4);
    const Dataset small{big.X.topRows(3), big.Y.head(12)};
    for (int q = 0; q < 20; ++q) {
        const Eigen::VectorXd x = random_vector(rng, 2);
        EXPECT_LE(posterior(h, big, x).cov.trace(), posterior(h, small, x).cov.trace() + 1e-8);
    }
}

TEST(TogpPosterior, CovarianceIsPsd) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const TensorShape shape = random_shape(rng, 2, 6);
        const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, TensorKernel::Kind::NonSeparable, CoreKind::Full));
        const Dataset data = random_dataset(rng, 5, 2, shape.total());
        EXPECT_GE(min_eigenvalue(posterior(h, data, random_vector(rng, 2)).cov), -1e-8);
    }
}

TEST(TogpLikelihood, DiagonalCovarianceClosedForm) {
    // Widely spaced inputs and a tiny lengthscale make K_n = I; sigma^2 = tau^2 = 1 gives Sigma = 2I.
    const TogpHyper h = scalar_hyper(1.0, 1.0);
    Dataset data{Eigen::Vector3d(0, 10, 20), Eigen::VectorXd::Zero(3)};
    EXPECT_NEAR(log_marginal_likelihood(h, data), -1.5 * std::log(2.0), 1e-12);
}

TEST(TogpLikelihood, ScalarCase) {
    const TogpHyper h = scalar_hyper(0.7, 0.2);
    const Dataset data{Eigen::MatrixXd::Constant(1, 1, 0.3), scalar(1.3)};
    const double s = 0.9;
    EXPECT_NEAR(log_marginal_likelihood(h, data), -0.5 * std::log(s) - 1.3 * 1.3 / (2 * s), 1e-12);
    // d/dsigma^2 of the same expression
    EXPECT_NEAR(grad_log_marginal_likelihood(h, data).signal_variance, -0.5 / s + 1.3 * 1.3 / (2 * s * s), 1e-12);
}

TEST(TogpLikelihood, MatchesDenseEvaluation) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const TensorShape shape = random_shape(rng, 3, 8);
        const auto kind = trial % 2 ? TensorKernel::Kind::Separable : TensorKernel::Kind::NonSeparable;
        const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, kind, static_cast<CoreKind>(trial % 3)));
        const Dataset data = random_dataset(rng, 4, 2, shape.total());
        const Eigen::MatrixXd S = h.signal_variance * gram(h.kernel, data.X) +
                                  h.noise_variance * Eigen::MatrixXd::Identity(4 * shape.total(), 4 * shape.total());
        const Eigen::VectorXd r = data.Y - h.mean_vector().replicate(4, 1);
        const double expect = -0.5 * std::log(S.determinant()) - 0.5 * r.dot(S.inverse() * r);
        EXPECT_NEAR(log_marginal_likelihood(h, data), expect, 1e-8);
    }
}

TEST(TogpLikelihood, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 18; ++trial) {
        const TensorShape shape = random_shape(rng, 3, 8);
        const auto kind = trial % 2 ? TensorKernel::Kind::Separable : TensorKernel::Kind::NonSeparable;
        const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, kind, static_cast<CoreKind>(trial % 3)));
        const Dataset data = random_dataset(rng, 4, 2, shape.total());
        const Eigen::VectorXd an = grad_log_marginal_likelihood(h, data).flat();
        const Eigen::VectorXd fd = fd_hyper_gradient([&](const TogpHyper& t) { return log_marginal_likelihood(t, data); }, h);
        for (Eigen::Index i = 0; i < an.size(); ++i) EXPECT_LT(rel_err(fd(i), an(i), 1e-4), 1e-4) << "component " << i;
    }
}

TEST(TogpLikelihood, ZeroDataNoiseGradient) {
    std::mt19937_64 rng(8);
    TogpHyper h = random_hyper(rng, random_kernel(rng, TensorShape({2, 2}), 2, TensorKernel::Kind::Separable, CoreKind::Full));
    h.prior_mean = Eigen::VectorXd::Zero(4);
    const Dataset data{random_inputs(rng, 3, 2), Eigen::VectorXd::Zero(12)};
    const Eigen::MatrixXd S = h.signal_variance * gram(h.kernel, data.X) + h.noise_variance * Eigen::MatrixXd::Identity(12, 12);
    EXPECT_NEAR(grad_log_marginal_likelihood(h, data).noise_variance, -0.5 * S.inverse().trace(), 1e-10);
}

TEST(TogpSolver, KroneckerMatchesDense) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const TensorShape shape = random_shape(rng, 3, 8);
        const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, TensorKernel::Kind::Separable, static_cast<CoreKind>(trial % 3)));
        const Dataset data = random_dataset(rng, 5, 2, shape.total());
        const TogpModel dense(h, data, SolverKind::Dense), kron(h, data, SolverKind::Kronecker);
        const Eigen::VectorXd x = random_vector(rng, 2);
        EXPECT_LT(max_abs(dense.posterior(x).mean - kron.posterior(x).mean), 1e-10);
        EXPECT_LT(max_abs(dense.posterior(x).cov - kron.posterior(x).cov), 1e-10);
        EXPECT_NEAR(dense.log_marginal_likelihood(), kron.log_marginal_likelihood(), 1e-10);
    }
}

TEST(TogpFit, StationaryPointIsKept) {
    // One scalar observation at its prior mean: sigma^2 and tau^2 both want to shrink to the lower bound.
    // Starting there, the fit must not move.
    TogpHyper h = scalar_hyper(1e-6, 1e-6);
    const Dataset data{Eigen::MatrixXd::Constant(1, 1, 0.5), scalar(0.0)};
    FitOptions fo;
    fo.min_variance = 1e-6;
    fo.min_noise_variance = 1e-6;
    const FitResult r = fit(data, h, fo);
    EXPECT_NEAR(r.hyper.signal_variance, 1e-6, 1e-9);
    EXPECT_NEAR(r.hyper.noise_variance, 1e-6, 1e-9);
}

TEST(TogpFit, RecoversIdentifiableScaleAndAscends) {
    std::mt19937_64 rng(10);
    const TensorShape shape({2, 2});
    TogpHyper truth;
    truth.kernel = TensorKernel::separable(shape, FullCore{Eigen::Vector4d(0.2, -0.5, 0.4, 0.7)},
                                           BaseKernel{BaseFamily::Matern52, scalar(0.3)});
    truth.signal_variance = 2.0;
    truth.noise_variance = 0.01;
    truth.prior_mean = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd X(30, 1);
    for (int i = 0; i < 30; ++i) X(i, 0) = 10.0 * (i + unit_uniform(rng)) / 30.0;
    const Dataset data{X, sample_outputs(rng, truth, X)};

    TogpHyper init = truth;
    init.kernel = TensorKernel::separable(shape, uniform_core({}, shape), BaseKernel{BaseFamily::Matern52, scalar(1.0)});
    init.signal_variance = 1.0;
    init.noise_variance = 0.1;
    const FitResult r = fit(data, init);
    const double target = truth.signal_variance * truth.kernel.loading(0).squaredNorm();
    const double got = r.hyper.signal_variance * r.hyper.kernel.loading(0).squaredNorm();
    EXPECT_LT(std::abs(got - target) / target, 0.25) << "got " << got << " target " << target;
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i], r.trace[i - 1]);
    EXPECT_GE(r.log_likelihood, r.initial_log_likelihood);
}

TEST(TogpRank, SingleCandidateReturnedUnchanged) {
    std::mt19937_64 rng(11);
    const TensorShape shape({2, 2});
    const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 1, TensorKernel::Kind::Separable, CoreKind::CP));
    const Dataset data = random_dataset(rng, 10, 1, 4);
    const CoreSpec only{CoreKind::TT, 1, {1, 2, 1}};
    const RankSelection sel = select_rank(data, h, std::span<const CoreSpec>(&only, 1));
    EXPECT_EQ(sel.best, only);
}

TEST(TogpRank, RankOneTruthPrefersRankOne) {
    std::mt19937_64 rng(12);
    const TensorShape shape({3, 2});
    TogpHyper truth;
    truth.kernel = TensorKernel::separable(shape, CpCore{1, {Eigen::Vector3d(1.0, 0.6, -0.8), Eigen::Vector2d(0.9, 0.5)}},
                                           BaseKernel{BaseFamily::Matern52, scalar(0.25)});
    truth.signal_variance = 1.0;
    truth.noise_variance = 1e-4;
    truth.prior_mean = Eigen::VectorXd::Constant(6, 3.0);
    Eigen::MatrixXd X(40, 1);
    for (int i = 0; i < 40; ++i) X(i, 0) = (i + unit_uniform(rng)) / 40.0;
    const Dataset data{X, sample_outputs(rng, truth, X)};
    TogpHyper init = truth;
    init.kernel = TensorKernel::separable(shape, uniform_core({CoreKind::CP, 1, {}}, shape),
                                          BaseKernel{BaseFamily::Matern52, scalar(0.5)});
    const std::vector<CoreSpec> cands = {{CoreKind::CP, 1, {}}, {CoreKind::CP, 2, {}}};
    const RankSelection sel = select_rank(data, init, cands);
    EXPECT_EQ(sel.best.cp_rank, 1u);
}

TEST(TogpRank, MeanRelativeErrorFormula) {
    const std::vector<Eigen::VectorXd> truth = {Eigen::Vector2d(2, 2)}, pred = {Eigen::Vector2d(1, 1)};
    EXPECT_NEAR(mean_relative_error(truth, pred), std::sqrt(0.5), 1e-15);
    std::size_t excluded = 0;
    const std::vector<Eigen::VectorXd> t2 = {Eigen::Vector2d(0, 2)}, p2 = {Eigen::Vector2d(5, 1)};
    EXPECT_NEAR(mean_relative_error(t2, p2, &excluded), 0.5, 1e-15);
    EXPECT_EQ(excluded, 1u);
}

TEST(TogpNystrom, FullRankIsExact) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const TensorShape shape = random_shape(rng, 2, 6);
        const auto kind = trial % 2 ? TensorKernel::Kind::Separable : TensorKernel::Kind::NonSeparable;
        const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, kind, CoreKind::Full));
        const Dataset data = random_dataset(rng, 4, 2, shape.total());
        const Eigen::VectorXd x = random_vector(rng, 2);
        const NystromResult r = nystrom_posterior(h, data, x, NystromConfig{});
        const Posterior exact = posterior(h, data, x);
        EXPECT_EQ(r.landmarks, 4 * shape.total());
        EXPECT_LT(max_abs(r.posterior.mean - exact.mean), 1e-8);
        EXPECT_LT(max_abs(r.posterior.cov - exact.cov), 1e-8);
    }
}

TEST(TogpNystrom, SeparableNeedsOnlyNLandmarks) {
    std::mt19937_64 rng(14);
    const TensorShape shape({2, 2});
    const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, TensorKernel::Kind::Separable, CoreKind::Full));
    const Dataset data = random_dataset(rng, 5, 2, 4);
    const Eigen::VectorXd x = random_vector(rng, 2);
    NystromConfig cfg;
    cfg.landmarks = 5;
    // Strided landmarks take one column per observation block, spanning the rank-n Gram.
    const NystromResult r = nystrom_posterior(h, data, x, cfg);
    EXPECT_LT(max_abs(r.posterior.mean - posterior(h, data, x).mean), 1e-6);
}

TEST(TogpNystrom, FullThresholdKeepsEffectiveRank) {
    std::mt19937_64 rng(15);
    const TensorShape shape({2});
    const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, TensorKernel::Kind::NonSeparable, CoreKind::Full));
    const Dataset data = random_dataset(rng, 4, 2, 2);
    const NystromResult r = nystrom_posterior(h, data, random_vector(rng, 2), NystromConfig{});
    const Eigen::MatrixXd G = gram(h.kernel, data.X);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const double cutoff = 1e-12 * es.eigenvalues().maxCoeff();
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) rank += es.eigenvalues()(i) > cutoff;
    EXPECT_EQ(r.rank, rank);
}

TEST(TogpHyper, ValidateRejectsBadValues) {
    TogpHyper h = scalar_hyper(1.0, 0.1);
    h.noise_variance = 0.0;
    EXPECT_THROW(h.validate(), std::invalid_argument);
    h = scalar_hyper(-1.0, 0.1);
    EXPECT_THROW(h.validate(), std::invalid_argument);
}
