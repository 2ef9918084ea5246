#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "tobo/kernels.hpp"

namespace tobo {

/// n x d Latin hypercube design in the box: each dimension is split into n
/// equal strata, every stratum holds exactly one point, jittered uniformly.
Eigen::MatrixXd latin_hypercube(std::size_t n, const InputDomain& box, std::mt19937_64& rng);

/// First n points of a Halton sequence (skipping index 0), randomized by a
/// seeded Cranley-Patterson rotation, mapped into the box. Rows are points.
Eigen::MatrixXd halton_points(std::size_t n, const InputDomain& box, std::uint64_t seed);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double unit_uniform(std::mt19937_64& rng);

/// Independent seed for a named sub-stream of a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace tobo
