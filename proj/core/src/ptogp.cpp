#include "tobo/ptogp.hpp"

#include <numeric>

#include "tobo/error.hpp"

namespace tobo {

SelectionVector::SelectionVector(std::vector<std::uint8_t> bits, std::size_t k) : bits_(std::move(bits)), k_(k) {
    std::size_t ones = 0;
    for (auto b : bits_) {
        if (b > 1) throw ShapeError("selection entries must be 0 or 1");
        ones += b;
    }
    if (ones != k_)
        throw ShapeError("selection has " + std::to_string(ones) + " ones but k = " + std::to_string(k_));
    if (k_ < 1 || k_ > bits_.size())
        throw ShapeError("selection size k = " + std::to_string(k_) + " must lie in [1, " +
                         std::to_string(bits_.size()) + "]");
}

SelectionVector SelectionVector::from_indices(std::size_t T, const std::vector<Eigen::Index>& indices) {
    std::vector<std::uint8_t> bits(T, 0);
    for (auto i : indices) {
        if (i < 0 || static_cast<std::size_t>(i) >= T) throw ShapeError("selected index out of range");
        if (bits[static_cast<std::size_t>(i)]) throw ShapeError("selected index repeated");
        bits[static_cast<std::size_t>(i)] = 1;
    }
    return SelectionVector(std::move(bits), indices.size());
}

SelectionVector SelectionVector::all(std::size_t T) { return SelectionVector(std::vector<std::uint8_t>(T, 1), T); }

SelectionVector SelectionVector::from_bitstring(const std::string& s) {
    std::vector<std::uint8_t> bits;
    std::size_t k = 0;
    for (char c : s) {
        if (c != '0' && c != '1') throw ShapeError("selection bitstring may contain only '0' and '1'");
        bits.push_back(static_cast<std::uint8_t>(c - '0'));
        k += static_cast<std::size_t>(c - '0');
    }
    return SelectionVector(std::move(bits), k);
}

std::vector<Eigen::Index> SelectionVector::indices() const {
    std::vector<Eigen::Index> out;
    out.reserve(k_);
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) out.push_back(static_cast<Eigen::Index>(i));
    return out;
}

std::string SelectionVector::bitstring() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(b ? '1' : '0');
    return s;
}

Eigen::MatrixXd selection_matrix(const SelectionVector& lambda) {
    const auto idx = lambda.indices();
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(lambda.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) e(static_cast<Eigen::Index>(j), idx[j]) = 1.0;
    return e;
}

void PartialDataset::validate(std::size_t output_size) const {
    if (selections.size() != size()) throw ShapeError("one selection per observation row required");
    for (const auto& s : selections) {
        if (s.size() != output_size) throw ShapeError("selection length does not match the tensor size T");
        if (s.k() != k) throw ShapeError("every selection must have exactly k ones");
    }
    if (static_cast<std::size_t>(Y.size()) != size() * k)
        throw ShapeError("expected " + std::to_string(size() * k) + " observed values, got " + std::to_string(Y.size()));
}

EntryLists PartialDataset::entries() const {
    EntryLists out;
    out.reserve(selections.size());
    for (const auto& s : selections) out.push_back(s.indices());
    return out;
}

PtogpModel::PtogpModel(TogpHyper hyper, PartialDataset data)
    : data_((data.validate(hyper.kernel.output_size()), std::move(data))),
      cond_(std::move(hyper), data_.X, data_.entries(), data_.Y) {}

PartialPosterior restrict_posterior(const Posterior& full, const SelectionVector& lambda) {
    if (static_cast<std::size_t>(full.mean.size()) != lambda.size()) throw ShapeError("selection length does not match T");
    const auto idx = lambda.indices();
    return {full.mean(idx), full.cov(idx, idx)};
}

PartialPosterior PtogpModel::partial_posterior(const Eigen::VectorXd& x, const SelectionVector& lambda) const {
    return restrict_posterior(cond_.latent(x), lambda);
}

Eigen::MatrixXd PtogpModel::partial_cross_cov(const Eigen::VectorXd& x, const SelectionVector& lambda,
                                              const Eigen::VectorXd& xp, const SelectionVector& lambda_p) const {
    const auto T = hyper().kernel.output_size();
    if (lambda.size() != T || lambda_p.size() != T) throw ShapeError("selection length does not match T");
    return cond_.latent_cross_cov(x, xp)(lambda.indices(), lambda_p.indices());
}

PartialPosterior partial_posterior(const TogpHyper& h, const PartialDataset& data, const Eigen::VectorXd& x,
                                   const SelectionVector& lambda) {
    return PtogpModel(h, data).partial_posterior(x, lambda);
}

double partial_log_marginal_likelihood(const TogpHyper& h, const PartialDataset& data) {
    return PtogpModel(h, data).log_marginal_likelihood();
}

HyperGradient grad_partial_log_marginal_likelihood(const TogpHyper& h, const PartialDataset& data) {
    return PtogpModel(h, data).log_marginal_likelihood_gradient();
}

FitResult fit_partial(const PartialDataset& data, const TogpHyper& init, const FitOptions& opts) {
    data.validate(init.kernel.output_size());
    const EntryLists entries = data.entries();
    return fit_hyperparameters(
        init, [&](const TogpHyper& h) { return GpConditioner(h, data.X, entries, data.Y); }, opts);
}

}  // namespace tobo
