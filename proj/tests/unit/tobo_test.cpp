#include <cmath>

#include <gtest/gtest.h>

#include "random_instances.hpp"
#include "tobo/error.hpp"
#include "tobo/linalg.hpp"
#include "tobo/problem.hpp"
#include "tobo/scalarization.hpp"
#include "tobo/tobo.hpp"

using namespace tobo;
using namespace tobo::testing;

namespace {

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

/// Scalar-output surrogate on [0, 1] with the given data.
TogpModel scalar_model(const std::vector<double>& xs, const std::vector<double>& ys, double lengthscale = 0.2) {
    TogpHyper h;
    h.kernel = TensorKernel::separable(TensorShape({1}), FullCore{scalar(1.0)}, BaseKernel{BaseFamily::Matern52, scalar(lengthscale)});
    h.signal_variance = 1.0;
    h.noise_variance = 1e-4;
    Dataset d{Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
              Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()))};
    return TogpModel(h, d);
}

double grid_argmax(const std::function<double(double)>& f) {
    double best = -1e300, arg = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double x = i / 9999.0;
        const double v = f(x);
        if (v > best) {
            best = v;
            arg = x;
        }
    }
    return arg;
}

FunctionProblem quadratic_problem() {
    return FunctionProblem(TensorShape({1}), InputDomain::unit_cube(1),
                           [](const Eigen::VectorXd& x) { return scalar(-(x(0) - 0.3) * (x(0) - 0.3)); });
}

}  // namespace

TEST(Scalarization, Examples) {
    EXPECT_EQ(Scalarization::sum()(Eigen::VectorXd::Ones(5)), 5.0);
    EXPECT_NEAR(Scalarization::exp_weighted(Eigen::VectorXd::Zero(4), 2.0)(Eigen::VectorXd::Zero(4)), 4 * std::exp(-1.0), 1e-15);
    EXPECT_EQ(Scalarization::weighted_sum(Eigen::Vector3d(1, 0, 0))(Eigen::Vector3d(7, 8, 9)), 7.0);
    const Scalarization w = Scalarization::weighted_sum(Eigen::Vector3d(1, 2, 3));
    const std::vector<Eigen::Index> idx = {0, 2};
    EXPECT_EQ(w.partial(Eigen::Vector2d(1, 1), idx), 4.0);
}

TEST(Scalarization, ValidationNamesField) {
    EXPECT_THROW(Scalarization::weighted_sum(Eigen::Vector2d(1, 1)).validate(3), ConfigError);
    EXPECT_THROW(Scalarization::exp_weighted(Eigen::Vector3d(1, 1, 1), 0.0).validate(3), ConfigError);
    EXPECT_NO_THROW(Scalarization::sum().validate(3));
    EXPECT_EQ(scalarization_kind_from_string("exp_weighted"), Scalarization::Kind::ExpWeighted);
}

TEST(Ucb, Examples) {
    const Scalarization s = Scalarization::sum();
    Posterior p{Eigen::Vector2d(1.5, -0.5), Eigen::Matrix2d::Identity()};
    EXPECT_EQ(ucb(s, p, 0.0), 1.0);
    p.mean.setZero();
    EXPECT_NEAR(ucb(s, p, 1.0), 1.0, 1e-15);
    p.cov = Eigen::Vector2d(4, 1).asDiagonal();
    EXPECT_NEAR(ucb(s, p, 2.0), 4.0, 1e-14);
}

TEST(SelectInput, ZeroDataReturnsPointInBox) {
    const InputDomain box(Eigen::Vector2d(-1, 2), Eigen::Vector2d(0, 3));
    TogpHyper h;
    h.kernel = make_kernel({}, TensorShape({2}), box);
    const TogpModel m(h, Dataset{Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)});
    const Eigen::VectorXd x = select_input(m, box, Scalarization::sum(), 2.0, {}, 1);
    EXPECT_TRUE(box.contains(x));
}

TEST(SelectInput, ExploitationFindsMeanPeak) {
    const TogpModel m = scalar_model({0.1, 0.35, 0.55, 0.9}, {0.0, 0.8, 0.6, -0.2});
    const InputDomain box = InputDomain::unit_cube(1);
    const double expect = grid_argmax([&](double x) { return m.posterior(scalar(x)).mean(0); });
    const Eigen::VectorXd x = select_input(m, box, Scalarization::sum(), 0.0, {}, 3);
    EXPECT_NEAR(x(0), expect, 1e-3);
}

TEST(SelectInput, LargeBetaFindsVariancePeak) {
    const TogpModel m = scalar_model({0.3, 0.5, 0.6}, {0.1, 0.2, 0.1});
    const InputDomain box = InputDomain::unit_cube(1);
    const double expect = grid_argmax([&](double x) { return m.posterior(scalar(x)).cov(0, 0); });
    const Eigen::VectorXd x = select_input(m, box, Scalarization::sum(), 1e6, {}, 4);
    EXPECT_NEAR(x(0), expect, 1e-3);
}

TEST(SelectInput, ScaleInvariantArgmax) {
    std::mt19937_64 rng(5);
    const TensorShape shape({2, 2});
    const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, TensorKernel::Kind::Separable, CoreKind::Full));
    const TogpModel m(h, random_dataset(rng, 5, 2, 4));
    const Eigen::Vector4d w(0.5, 1.0, 0.2, 0.7);
    const InputDomain box = InputDomain::unit_cube(2);
    const Eigen::VectorXd a = select_input(m, box, Scalarization::weighted_sum(w), 1.5, {}, 9);
    const Eigen::VectorXd b = select_input(m, box, Scalarization::weighted_sum(2.0 * w), 3.0, {}, 9);
    EXPECT_EQ(a, b);
}

TEST(Acquisition, BestStartWinsTiesToLowestIndex) {
    const InputDomain box = InputDomain::unit_cube(1);
    // Flat objective: every start ties, so the first start must win.
    SearchConfig cfg;
    cfg.starts = 8;
    const AcquisitionMax r = maximize_acquisition([](const Eigen::VectorXd&) { return 1.0; }, box, cfg, 2);
    EXPECT_EQ(r.start, 0u);
}

TEST(BetaSchedule, HandComputedValues) {
    BetaSchedule b;
    EXPECT_EQ(b(0, 2), 1.0);
    EXPECT_NEAR(b(3, 2), 3.3548200450309493, 1e-14);
    b.kind = BetaSchedule::Kind::Theoretical;
    EXPECT_NEAR(b(2, 2, 3.0), 23.278562698747034, 1e-12);
    b.form = BetaSchedule::Form::Sqrt;
    EXPECT_NEAR(b(2, 2, 3.0), 6.373872851893514, 1e-12);
}

TEST(BetaSchedule, MonotoneInRounds) {
    for (auto kind : {BetaSchedule::Kind::Practical, BetaSchedule::Kind::Theoretical}) {
        BetaSchedule b;
        b.kind = kind;
        for (std::size_t n = 1; n < 200; ++n) EXPECT_GT(b(n + 1, 3), b(n, 3));
    }
    BetaSchedule bad;
    bad.delta = 1.5;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(EstimateCn, IsotropicCovarianceGivesDimension) {
    const auto cov = [](const Eigen::VectorXd&) -> Eigen::MatrixXd { return 2.0 * Eigen::MatrixXd::Identity(3, 3); };
    EXPECT_NEAR(estimate_cn(cov, InputDomain::unit_cube(2), 16, 0), 3.0, 1e-12);
}

TEST(InformationGain, ClosedForms) {
    const Eigen::MatrixXd X = Eigen::Vector3d(0, 10, 20);
    const TensorKernel zero = TensorKernel::separable(TensorShape({1}), FullCore{scalar(0.0)}, BaseKernel{BaseFamily::Gaussian, scalar(0.01)});
    EXPECT_EQ(information_gain(zero, X, 1.0), 0.0);
    const TensorKernel id = TensorKernel::separable(TensorShape({1}), FullCore{scalar(1.0)}, BaseKernel{BaseFamily::Gaussian, scalar(0.01)});
    EXPECT_NEAR(information_gain(id, X, 1.0), 1.5 * std::log(2.0), 1e-14);
}

TEST(InformationGain, KroneckerEigenvalueFormula) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const TensorShape shape = random_shape(rng, 3, 8);
        const TensorKernel k = random_kernel(rng, shape, 2, TensorKernel::Kind::Separable, static_cast<CoreKind>(trial % 3));
        const Eigen::MatrixXd X = random_inputs(rng, uniform_int(rng, 1, 6), 2);
        const double eta = uniform(rng, 0.05, 1.0);
        Eigen::MatrixXd Kx(X.rows(), X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            for (Eigen::Index j = 0; j < X.rows(); ++j)
                Kx(i, j) = k.components()[0].bases[0].eval(X.row(i).transpose(), X.row(j).transpose());
        const Eigen::VectorXd a = k.loading(0);
        const Eigen::VectorXd alpha = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Kx).eigenvalues();
        const Eigen::VectorXd beta = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a * a.transpose()).eigenvalues();
        double expect = 0.0;
        for (Eigen::Index i = 0; i < alpha.size(); ++i)
            for (Eigen::Index j = 0; j < beta.size(); ++j) expect += 0.5 * std::log1p(std::max(0.0, alpha(i) * beta(j)) / eta);
        EXPECT_NEAR(information_gain(k, X, eta), expect, 1e-8);
    }
}

TEST(InformationGain, MonotoneInDesign) {
    std::mt19937_64 rng(7);
    const TensorKernel k = random_kernel(rng, TensorShape({2, 2}), 2, TensorKernel::Kind::NonSeparable, CoreKind::CP);
    Eigen::MatrixXd X = random_inputs(rng, 1, 2);
    double prev = information_gain(k, X, 0.3);
    for (int i = 0; i < 6; ++i) {
        X.conservativeResize(X.rows() + 1, Eigen::NoChange);
        X.row(X.rows() - 1) = random_inputs(rng, 1, 2);
        const double g = information_gain(k, X, 0.3);
        EXPECT_GE(g, prev - 1e-10);
        prev = g;
    }
}

TEST(RunTobo, NoRoundsKeepsInitialDesign) {
    const FunctionProblem p = quadratic_problem();
    ToboConfig cfg;
    cfg.n0 = 4;
    cfg.N = 0;
    cfg.seed = 3;
    cfg.optimum = 0.0;
    const RunResult r = run_tobo(p, cfg);
    ASSERT_EQ(r.records.size(), 4u);
    double best = -1e300;
    for (const auto& rec : r.records) {
        EXPECT_TRUE(rec.initial);
        best = std::max(best, rec.scalarized);
        EXPECT_EQ(rec.incumbent, best);
    }
    EXPECT_EQ(r.records[r.best].scalarized, best);
}

TEST(RunTobo, NoiselessQuadraticRegretDrops) {
    const FunctionProblem p = quadratic_problem();
    ToboConfig cfg;
    cfg.n0 = 3;
    cfg.N = 30;
    cfg.seed = 1;
    cfg.optimum = 0.0;
    const RunResult r = run_tobo(p, cfg);
    ASSERT_FALSE(r.failed) << r.failure;
    ASSERT_EQ(r.records.size(), 33u);
    EXPECT_LT(*r.records.back().regret, *r.records.front().regret);
    double running = -1e300, cumulative = 0.0;
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        const auto& rec = r.records[i];
        EXPECT_EQ(rec.round, i + 1);
        running = std::max(running, rec.scalarized);
        EXPECT_EQ(rec.incumbent, running);
        cumulative += *rec.regret;
        EXPECT_NEAR(*rec.cumulative_regret, cumulative, 1e-12);
        EXPECT_GE(*rec.regret, -1e-12);
    }
}

TEST(RunTobo, SameSeedSameRecords) {
    const FunctionProblem base = quadratic_problem();
    const FunctionProblem p(TensorShape({1}), InputDomain::unit_cube(1), [&](const Eigen::VectorXd& x) { return base.truth(x); }, 0.05);
    ToboConfig cfg;
    cfg.n0 = 3;
    cfg.N = 5;
    cfg.seed = 42;
    const RunResult a = run_tobo(p, cfg), b = run_tobo(p, cfg);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].x, b.records[i].x);
        EXPECT_EQ(a.records[i].y, b.records[i].y);
    }
}

TEST(RunTobo, FailureKeepsPartialRecords) {
    const FunctionProblem p = quadratic_problem();
    ToboConfig cfg;
    cfg.n0 = 3;
    cfg.N = 5;
    cfg.fail_after = 2;
    const RunResult r = run_tobo(p, cfg);
    EXPECT_TRUE(r.failed);
    EXPECT_EQ(r.records.size(), 5u);
}

TEST(Streams, SeedsAreDistinct) {
    EXPECT_NE(stream_seed(1, Stream::Design), stream_seed(1, Stream::Noise));
    EXPECT_NE(stream_seed(1, Stream::Search, 1), stream_seed(1, Stream::Search, 2));
    EXPECT_NE(stream_seed(1, Stream::Design), stream_seed(2, Stream::Design));
    EXPECT_EQ(stream_seed(7, Stream::Arms, 3), stream_seed(7, Stream::Arms, 3));
}

TEST(Surrogate, InitialHyperCentersAndScales) {
    const TensorShape shape({2});
    const TensorKernel k = make_kernel({}, shape, InputDomain::unit_cube(1));
    const EntryLists e = {{0, 1}, {0}, {1}};
    const Eigen::VectorXd Y = Eigen::Vector4d(1.0, 3.0, 2.0, 5.0);
    const TogpHyper h = initial_hyper(k, e, Y, SurrogateConfig{});
    EXPECT_NEAR(h.prior_mean(0), 1.5, 1e-15);
    EXPECT_NEAR(h.prior_mean(1), 4.0, 1e-15);
    EXPECT_GT(h.signal_variance, 0.0);
    EXPECT_GT(h.noise_variance, 0.0);
}
