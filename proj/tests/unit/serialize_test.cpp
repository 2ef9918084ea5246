#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "random_instances.hpp"
#include "tobo/error.hpp"
#include "tobo/serialize.hpp"

using namespace tobo;
using namespace tobo::testing;

namespace {

nlohmann::json through_text(const nlohmann::json& j) { return nlohmann::json::parse(j.dump()); }

}  // namespace

TEST(Serialize, KernelRoundTripIsExact) {
    std::mt19937_64 rng(1);
    for (auto kind : {TensorKernel::Kind::Separable, TensorKernel::Kind::NonSeparable})
        for (auto core : {CoreKind::Full, CoreKind::CP, CoreKind::TT}) {
            const TensorShape shape({2, 3});
            const TensorKernel k = random_kernel(rng, shape, 2, kind, core);
            const TensorKernel back = kernel_from_json(through_text(to_json(k)));
            EXPECT_EQ(back.kind(), k.kind());
            EXPECT_EQ(back.params(), k.params());
            const Eigen::VectorXd x = random_vector(rng, 2), xp = random_vector(rng, 2);
            EXPECT_EQ(back.eval(x, xp), k.eval(x, xp));
        }
}

TEST(Serialize, SurrogateRoundTripReproducesPosterior) {
    std::mt19937_64 rng(2);
    const TensorShape shape({3, 2});
    const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 2, TensorKernel::Kind::NonSeparable, CoreKind::CP));
    const Dataset data = random_dataset(rng, 6, 2, 6);
    const LoadedSurrogate s = surrogate_from_json(through_text(surrogate_to_json(h, data)));
    EXPECT_FALSE(s.partial);
    EXPECT_EQ(s.X, data.X);
    EXPECT_EQ(s.Y, data.Y);
    EXPECT_EQ(s.hyper.noise_variance, h.noise_variance);
    EXPECT_EQ(s.hyper.signal_variance, h.signal_variance);
    EXPECT_EQ(s.hyper.prior_mean, h.prior_mean);
    const Eigen::VectorXd x = random_vector(rng, 2);
    const Posterior a = TogpModel(h, data).posterior(x), b = TogpModel(s.hyper, Dataset{s.X, s.Y}).posterior(x);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.cov, b.cov);
}

TEST(Serialize, PartialSurrogateKeepsSelections) {
    std::mt19937_64 rng(3);
    const TensorShape shape({2, 2});
    const TogpHyper h = random_hyper(rng, random_kernel(rng, shape, 1, TensorKernel::Kind::Separable, CoreKind::Full));
    const PartialDataset data = random_partial_data(rng, 5, 1, 4, 2);
    const LoadedSurrogate s = surrogate_from_json(through_text(surrogate_to_json(h, data)));
    EXPECT_TRUE(s.partial);
    EXPECT_EQ(s.k, 2u);
    ASSERT_EQ(s.entries.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(s.entries[i], data.selections[i].indices());
    EXPECT_EQ(s.Y, data.Y);
}

TEST(Serialize, RejectsWrongSchemaOrVersion) {
    std::mt19937_64 rng(4);
    const TogpHyper h = random_hyper(rng, random_kernel(rng, TensorShape({2}), 1, TensorKernel::Kind::Separable, CoreKind::Full));
    nlohmann::json j = surrogate_to_json(h, random_dataset(rng, 2, 1, 2));
    nlohmann::json bad_version = j;
    bad_version["version"] = 2;
    EXPECT_THROW(surrogate_from_json(bad_version), ConfigError);
    j["schema"] = "tobo.metrics";
    EXPECT_THROW(surrogate_from_json(j), ConfigError);
}

TEST(Serialize, MatrixHelpers) {
    const Eigen::MatrixXd M = (Eigen::MatrixXd(2, 3) << 1, 2, 3, 4, 5, 6).finished();
    const nlohmann::json j = matrix_to_json(M);
    EXPECT_EQ(j, nlohmann::json::parse("[[1.0,2.0,3.0],[4.0,5.0,6.0]]"));
    EXPECT_EQ(matrix_from_json(j), M);
    EXPECT_EQ(vector_from_json(vector_to_json(Eigen::Vector3d(0.1, 0.2, 0.3))), Eigen::Vector3d(0.1, 0.2, 0.3));
}
