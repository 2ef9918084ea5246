#include <random>

#include <benchmark/benchmark.h>

#include "tobo/bench.hpp"
#include "tobo/sampling.hpp"
#include "tobo/tobo.hpp"
#include "tobo/tocbbo.hpp"
#include "tobo/togp.hpp"

namespace {

using namespace tobo;

// Setting 2 sized surrogate: T = 6 outputs, d = 2 inputs, n observations.
struct Fixture {
    SyntheticProblem problem{synthetic_setting(2, 1)};
    Dataset data;
    TogpHyper hyper;

    Fixture(std::size_t n, TensorKernel::Kind kind) {
        std::mt19937_64 rng(7);
        data.X = latin_hypercube(n, problem.domain(), rng);
        data.Y.resize(static_cast<Eigen::Index>(n * problem.output_size()));
        const auto T = static_cast<Eigen::Index>(problem.output_size());
        for (Eigen::Index i = 0; i < data.X.rows(); ++i)
            data.Y.segment(i * T, T) = problem.evaluate(data.X.row(i).transpose(), rng);
        SurrogateConfig sc;
        sc.kernel.kind = kind;
        hyper = initial_hyper(make_kernel(sc.kernel, problem.shape(), problem.domain()),
                              full_entries(n, problem.output_size()), data.Y, sc);
    }
};

TensorKernel::Kind kind_arg(const benchmark::State& state) {
    return state.range(1) ? TensorKernel::Kind::NonSeparable : TensorKernel::Kind::Separable;
}

void BM_Gram(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)), kind_arg(state));
    for (auto _ : state) benchmark::DoNotOptimize(gram(f.hyper.kernel, f.data.X));
}
BENCHMARK(BM_Gram)->ArgsProduct({{10, 30}, {0, 1}});

void BM_Posterior(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)), kind_arg(state));
    const TogpModel model(f.hyper, f.data);
    const Eigen::Vector2d x(0.3, 0.6);
    for (auto _ : state) benchmark::DoNotOptimize(model.posterior(x));
}
BENCHMARK(BM_Posterior)->ArgsProduct({{10, 30}, {0, 1}});

void BM_LikelihoodGradient(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)), kind_arg(state));
    for (auto _ : state) benchmark::DoNotOptimize(grad_log_marginal_likelihood(f.hyper, f.data));
}
BENCHMARK(BM_LikelihoodGradient)->ArgsProduct({{10, 30}, {0, 1}});

void BM_KroneckerPosterior(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)), TensorKernel::Kind::Separable);
    const TogpModel model(f.hyper, f.data, SolverKind::Kronecker);
    const Eigen::Vector2d x(0.3, 0.6);
    for (auto _ : state) benchmark::DoNotOptimize(model.posterior(x));
}
BENCHMARK(BM_KroneckerPosterior)->Arg(10)->Arg(30);

void BM_Fit(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)), TensorKernel::Kind::Separable);
    FitOptions opts;
    opts.lbfgs.max_iterations = 50;
    for (auto _ : state) benchmark::DoNotOptimize(fit(f.data, f.hyper, opts));
}
BENCHMARK(BM_Fit)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Superarm(benchmark::State& state) {
    const auto T = static_cast<Eigen::Index>(state.range(0));
    const auto k = static_cast<std::size_t>(T / 3);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    const Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(T, T, [&] { return z(rng); });
    const Posterior p{Eigen::VectorXd::NullaryExpr(T, [&] { return z(rng); }), A * A.transpose()};
    const auto mode = state.range(1) ? SuperarmMode::Exact : SuperarmMode::Greedy;
    for (auto _ : state) benchmark::DoNotOptimize(select_superarm(p, k, Scalarization::sum(), 1.0, mode));
}
BENCHMARK(BM_Superarm)->ArgsProduct({{12, 18}, {0, 1}});

}  // namespace

BENCHMARK_MAIN();
