#include "tobo/sampling.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace tobo {

namespace {

constexpr std::array<unsigned, 32> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,  37,  41,  43,  47,  53,
                                              59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

double radical_inverse(std::uint64_t i, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

}  // namespace

double unit_uniform(std::mt19937_64& rng) {
    // 53 random bits; independent of the standard library's distribution code.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over (seed, stream)
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Eigen::MatrixXd latin_hypercube(std::size_t n, const InputDomain& box, std::mt19937_64& rng) {
    const auto d = static_cast<Eigen::Index>(box.dim());
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
    std::vector<std::size_t> perm(n);
    for (Eigen::Index j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            const auto k = static_cast<std::size_t>(rng() % i);
            std::swap(perm[i - 1], perm[k]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (static_cast<double>(perm[i]) + unit_uniform(rng)) / static_cast<double>(n);
            out(static_cast<Eigen::Index>(i), j) = box.lower(j) + u * (box.upper(j) - box.lower(j));
        }
    }
    return out;
}

Eigen::MatrixXd halton_points(std::size_t n, const InputDomain& box, std::uint64_t seed) {
    const std::size_t d = box.dim();
    if (d > kPrimes.size()) throw std::invalid_argument("Halton design supports at most 32 dimensions");
    std::mt19937_64 rng(seed);
    Eigen::VectorXd shift(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < shift.size(); ++j) shift(j) = unit_uniform(rng);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Eigen::VectorXd u(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double v = radical_inverse(i + 1, kPrimes[j]) + shift(static_cast<Eigen::Index>(j));
            u(static_cast<Eigen::Index>(j)) = v - std::floor(v);
        }
        out.row(static_cast<Eigen::Index>(i)) = box.from_unit(u).transpose();
    }
    return out;
}

}  // namespace tobo
