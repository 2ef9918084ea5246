#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "tobo/ptogp.hpp"
#include "tobo/scalarization.hpp"
#include "tobo/togp.hpp"

namespace tobo {

/// Reference posterior built the slow way: the joint Gaussian of
/// (vec f(x), every observed scalar) is assembled densely, entry by entry,
/// and conditioned with a full-pivot LU. Used to cross-check the fast paths.
Posterior joint_conditioning_posterior(const TogpHyper& h, const Eigen::MatrixXd& X, const EntryLists& entries,
                                       const Eigen::VectorXd& Y, const Eigen::VectorXd& x);

struct BruteForceSuperarm {
    std::vector<Eigen::Index> entries;
    double value = 0.0;
    /// Every subset and its objective, in bitmask order.
    std::vector<std::pair<std::vector<Eigen::Index>, double>> all;
};

/// Scores every k-subset of the T entries by bitmask enumeration with a
/// self-adjoint eigensolver for the spectral term. T must be at most 24.
BruteForceSuperarm brute_force_superarm(const Posterior& latent, std::size_t k, const Scalarization& s, double rho);

}  // namespace tobo
