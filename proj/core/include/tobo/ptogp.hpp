#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tobo/togp.hpp"

namespace tobo {

/// Binary indicator over the T entries of vec(f) with exactly k ones (a super-arm).
class SelectionVector {
public:
    SelectionVector() = default;
    /// Throws ShapeError unless every entry is 0/1, the ones count is k and 1 <= k <= T.
    SelectionVector(std::vector<std::uint8_t> bits, std::size_t k);

    static SelectionVector from_indices(std::size_t T, const std::vector<Eigen::Index>& indices);
    static SelectionVector all(std::size_t T);
    /// Parses a string of '0'/'1' characters.
    static SelectionVector from_bitstring(const std::string& s);

    std::size_t size() const noexcept { return bits_.size(); }
    std::size_t k() const noexcept { return k_; }
    bool operator[](std::size_t i) const { return bits_.at(i) != 0; }
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
    /// Selected coordinates in ascending order.
    std::vector<Eigen::Index> indices() const;
    std::string bitstring() const;

    friend bool operator==(const SelectionVector&, const SelectionVector&) = default;

private:
    std::vector<std::uint8_t> bits_;
    std::size_t k_ = 0;
};

/// k x T matrix e(lambda): row j holds a single 1 at the j-th selected coordinate.
Eigen::MatrixXd selection_matrix(const SelectionVector& lambda);

/// n partial observations: row i observed the entries selected by selections[i].
/// Y stacks the n observed k-vectors in ascending-entry order.
struct PartialDataset {
    Eigen::MatrixXd X;
    std::vector<SelectionVector> selections;
    Eigen::VectorXd Y;
    std::size_t k = 0;

    std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
    void validate(std::size_t output_size) const;
    EntryLists entries() const;
};

using PartialPosterior = Posterior;

/// Tensor-output GP conditioned on partially observed outputs.
class PtogpModel {
public:
    PtogpModel(TogpHyper hyper, PartialDataset data);

    /// Posterior of e(lambda) vec(f(x)) in R^k.
    PartialPosterior partial_posterior(const Eigen::VectorXd& x, const SelectionVector& lambda) const;
    /// Posterior covariance between e(lambda) vec(f(x)) and e(lambda') vec(f(xp)).
    Eigen::MatrixXd partial_cross_cov(const Eigen::VectorXd& x, const SelectionVector& lambda,
                                      const Eigen::VectorXd& xp, const SelectionVector& lambda_p) const;
    /// Posterior of the whole latent vec(f(x)).
    Posterior latent(const Eigen::VectorXd& x) const { return cond_.latent(x); }

    double log_marginal_likelihood() const { return cond_.log_marginal_likelihood(); }
    HyperGradient log_marginal_likelihood_gradient() const { return cond_.log_marginal_likelihood_gradient(); }

    const TogpHyper& hyper() const noexcept { return cond_.hyper(); }
    const PartialDataset& data() const noexcept { return data_; }

private:
    PartialDataset data_;
    GpConditioner cond_;
};

/// Restricts a full latent posterior to the entries selected by lambda.
PartialPosterior restrict_posterior(const Posterior& full, const SelectionVector& lambda);

PartialPosterior partial_posterior(const TogpHyper& h, const PartialDataset& data, const Eigen::VectorXd& x,
                                   const SelectionVector& lambda);
double partial_log_marginal_likelihood(const TogpHyper& h, const PartialDataset& data);
HyperGradient grad_partial_log_marginal_likelihood(const TogpHyper& h, const PartialDataset& data);

FitResult fit_partial(const PartialDataset& data, const TogpHyper& init, const FitOptions& opts = {});

}  // namespace tobo
