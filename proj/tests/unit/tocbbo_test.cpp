#include <cmath>
#include <numbers>
#include <numeric>

#include <gtest/gtest.h>

#include "random_instances.hpp"
#include "tobo/error.hpp"
#include "tobo/oracles.hpp"
#include "tobo/problem.hpp"
#include "tobo/tocbbo.hpp"

using namespace tobo;
using namespace tobo::testing;

namespace {

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

Posterior random_latent(std::mt19937_64& rng, std::size_t T, bool diagonal) {
    Posterior p;
    p.mean = random_vector(rng, T);
    if (diagonal) {
        p.cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(T));
        for (Eigen::Index i = 0; i < p.cov.rows(); ++i) p.cov(i, i) = uniform(rng, 0.01, 2.0);
    } else {
        const Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(T),
                                                               [&] { return uniform(rng, -1.0, 1.0); });
        p.cov = A * A.transpose();
    }
    return p;
}

}  // namespace

TEST(RhoSchedule, HandValueAndProperties) {
    const RhoSchedule r{0.1, 10};
    EXPECT_NEAR(r(3, 6), 4.26423604764631, 1e-12);
    for (std::size_t n = 1; n < 100; ++n) EXPECT_GT(r(n + 1, 6), r(n, 6));
    double s = 0.0;
    for (std::size_t n = 1; n <= 1000000; ++n) s += 1.0 / RhoSchedule::pi_n(n);
    EXPECT_GE(s, 0.999);
    EXPECT_LE(s, 1.0);
    EXPECT_NEAR(RhoSchedule::pi_n(1), std::numbers::pi * std::numbers::pi / 6, 1e-15);
}

TEST(Superarm, FullSelectionIsAllOnes) {
    std::mt19937_64 rng(1);
    const Posterior p = random_latent(rng, 5, false);
    for (auto mode : {SuperarmMode::Greedy, SuperarmMode::Exact})
        EXPECT_EQ(select_superarm(p, 5, Scalarization::sum(), 1.0, mode).lambda, SelectionVector::all(5));
}

TEST(Superarm, DiagonalNoExplorationIsTopK) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Posterior p = random_latent(rng, 7, true);
        std::vector<Eigen::Index> order(7);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p.mean(a) > p.mean(b); });
        order.resize(3);
        std::sort(order.begin(), order.end());
        const auto top = SelectionVector::from_indices(7, order);
        EXPECT_EQ(select_superarm(p, 3, Scalarization::sum(), 0.0, SuperarmMode::Greedy).lambda, top);
        EXPECT_EQ(select_superarm(p, 3, Scalarization::sum(), 0.0, SuperarmMode::Exact).lambda, top);
    }
}

TEST(Superarm, ExactMatchesBruteForce) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const Posterior p = random_latent(rng, 8, false);
        const auto exact = select_superarm(p, 3, Scalarization::sum(), 1.0, SuperarmMode::Exact);
        const auto brute = brute_force_superarm(p, 3, Scalarization::sum(), 1.0);
        EXPECT_EQ(brute.all.size(), 56u);
        EXPECT_EQ(exact.lambda.indices(), brute.entries);
        EXPECT_NEAR(exact.value, brute.value, 1e-12);
    }
}

TEST(Superarm, GreedyEqualsExactOnDiagonal) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t T = uniform_int(rng, 2, 10), k = uniform_int(rng, 1, T);
        const Posterior p = random_latent(rng, T, true);
        const auto g = select_superarm(p, k, Scalarization::sum(), 1.0, SuperarmMode::Greedy);
        const auto e = select_superarm(p, k, Scalarization::sum(), 1.0, SuperarmMode::Exact);
        EXPECT_NEAR(g.value, e.value, 1e-12);
    }
}

TEST(Superarm, ExactGuardAndBinomial) {
    EXPECT_EQ(binomial(8, 3), 56.0);
    EXPECT_EQ(binomial(5, 0), 1.0);
    EXPECT_EQ(binomial(3, 5), 0.0);
    Posterior p{Eigen::VectorXd::Zero(40), Eigen::MatrixXd::Identity(40, 40)};
    EXPECT_THROW(select_superarm(p, 20, Scalarization::sum(), 1.0, SuperarmMode::Exact), std::invalid_argument);
    EXPECT_NO_THROW(select_superarm(p, 20, Scalarization::sum(), 1.0, SuperarmMode::Greedy));
}

TEST(Superarm, AccuracyExamples) {
    const auto a = SelectionVector::from_indices(6, {0, 1, 2});
    EXPECT_EQ(superarm_accuracy(a, a), 1.0);
    EXPECT_EQ(superarm_accuracy(a, SelectionVector::from_indices(6, {3, 4, 5})), 0.0);
    EXPECT_NEAR(superarm_accuracy(a, SelectionVector::from_indices(6, {0, 2, 5})), 2.0 / 3.0, 1e-15);
}

TEST(SelectInputCbbo, FullSelectionMatchesTobo) {
    std::mt19937_64 rng(5);
    const TensorShape shape({2, 2});
    const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, TensorKernel::Kind::NonSeparable, CoreKind::Full));
    const Dataset full = random_dataset(rng, 5, 2, 4);
    const PartialDataset part{full.X, std::vector<SelectionVector>(5, SelectionVector::all(4)), full.Y, 4};
    const InputDomain box = InputDomain::unit_cube(2);
    const Eigen::VectorXd a = select_input(TogpModel(h, full), box, Scalarization::sum(), 1.3, {}, 11);
    const Eigen::VectorXd b = select_input_cbbo(PtogpModel(h, part), box, Scalarization::sum(), 1.3, SelectionVector::all(4), {}, 11);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SelectInputCbbo, ExploitationFindsPeakAndZeroDataStaysInBox) {
    TogpHyper h;
    h.kernel = TensorKernel::separable(TensorShape({2}), FullCore{Eigen::Vector2d(1.0, 0.0)},
                                       BaseKernel{BaseFamily::Matern52, scalar(0.2)});
    h.noise_variance = 1e-4;
    const SelectionVector first = SelectionVector::from_indices(2, {0});
    const PartialDataset data{Eigen::Vector4d(0.1, 0.35, 0.55, 0.9), std::vector<SelectionVector>(4, first),
                              Eigen::Vector4d(0.0, 0.8, 0.6, -0.2), 1};
    const PtogpModel m(h, data);
    const InputDomain box = InputDomain::unit_cube(1);
    double best = -1e300, arg = 0;
    for (int i = 0; i < 10000; ++i) {
        const double x = i / 9999.0, v = m.partial_posterior(scalar(x), first).mean(0);
        if (v > best) {
            best = v;
            arg = x;
        }
    }
    EXPECT_NEAR(select_input_cbbo(m, box, Scalarization::sum(), 0.0, first, {}, 1)(0), arg, 1e-3);
    const PtogpModel empty(h, PartialDataset{Eigen::MatrixXd(0, 1), {}, Eigen::VectorXd(0), 1});
    EXPECT_TRUE(box.contains(select_input_cbbo(empty, box, Scalarization::sum(), 2.0, first, {}, 1)));
}

TEST(RunTocbbo, SingleEntryReproducesToboBitForBit) {
    const FunctionProblem p(TensorShape({1}), InputDomain::unit_cube(2),
                            [](const Eigen::VectorXd& x) { return scalar(std::sin(3 * x(0)) * std::cos(2 * x(1))); }, 0.05);
    LoopConfig lc;
    lc.n0 = 4;
    lc.N = 6;
    lc.seed = 17;
    lc.optimum = 1.0;
    TocbboConfig cc;
    cc.loop = lc;
    cc.k = 1;
    cc.rho = {0.1, lc.N};
    const RunResult a = run_tobo(p, lc), b = run_tocbbo(p, cc);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].x, b.records[i].x);
        EXPECT_EQ(a.records[i].y, b.records[i].y);
        EXPECT_EQ(a.records[i].scalarized, b.records[i].scalarized);
        EXPECT_EQ(a.records[i].regret, b.records[i].regret);
    }
}

TEST(RunTocbbo, InitialOnlyAndInvariants) {
    const FunctionProblem p(TensorShape({3, 2}), InputDomain::unit_cube(1),
                            [](const Eigen::VectorXd& x) {
                                Eigen::VectorXd v(6);
                                for (int i = 0; i < 6; ++i) v(i) = std::sin((i + 1) * x(0));
                                return v;
                            },
                            0.01);
    TocbboConfig cfg;
    cfg.loop.n0 = 3;
    cfg.loop.N = 0;
    cfg.k = 2;
    EXPECT_EQ(run_tocbbo(p, cfg).records.size(), 3u);
    cfg.loop.N = 5;
    cfg.rho.horizon = 5;
    const RunResult r = run_tocbbo(p, cfg);
    ASSERT_FALSE(r.failed) << r.failure;
    double best = -1e300;
    for (const auto& rec : r.records) {
        EXPECT_EQ(rec.selection.k(), 2u);
        EXPECT_EQ(rec.y.size(), 2);
        best = std::max(best, rec.scalarized);
        EXPECT_EQ(rec.incumbent, best);
        if (!rec.initial) EXPECT_GT(rec.rho, 0.0);
    }
    cfg.k = 7;
    EXPECT_THROW(run_tocbbo(p, cfg), ConfigError);
}
