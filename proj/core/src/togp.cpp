#include "tobo/togp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tobo/error.hpp"

namespace tobo {

// ---------------------------------------------------------------------------
// Hyperparameters and data

Eigen::VectorXd TogpHyper::mean_vector() const {
    const auto T = static_cast<Eigen::Index>(kernel.output_size());
    if (prior_mean.size() == 0) return Eigen::VectorXd::Zero(T);
    return prior_mean;
}

void TogpHyper::validate() const {
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
        throw std::invalid_argument("signal variance must be positive and finite");
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
        throw std::invalid_argument("noise variance must be positive and finite");
    if (kernel.output_size() == 0) throw std::invalid_argument("hyperparameters hold an empty kernel");
    if (prior_mean.size() != 0 && static_cast<std::size_t>(prior_mean.size()) != kernel.output_size())
        throw ShapeError("prior mean length must equal the tensor size T");
}

void Dataset::validate(std::size_t output_size) const {
    if (static_cast<std::size_t>(Y.size()) != size() * output_size)
        throw ShapeError("dataset has " + std::to_string(size()) + " inputs but " + std::to_string(Y.size()) +
                         " stacked outputs (T = " + std::to_string(output_size) + ")");
}

Eigen::VectorXd HyperGradient::flat() const {
    Eigen::VectorXd out(2 + kernel.size());
    out(0) = noise_variance;
    out(1) = signal_variance;
    out.tail(kernel.size()) = kernel;
    return out;
}

EntryLists full_entries(std::size_t n, std::size_t output_size) {
    std::vector<Eigen::Index> all(output_size);
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    return EntryLists(n, all);
}

// ---------------------------------------------------------------------------
// GpConditioner

GpConditioner::GpConditioner(TogpHyper hyper, Eigen::MatrixXd X, EntryLists entries, Eigen::VectorXd observations)
    : hyper_(std::move(hyper)), X_(std::move(X)), entries_(std::move(entries)) {
    hyper_.validate();
    const auto T = static_cast<Eigen::Index>(hyper_.kernel.output_size());
    const Eigen::Index n = X_.rows();
    if (static_cast<Eigen::Index>(entries_.size()) != n) throw ShapeError("one entry list per observation required");
    if (n > 0 && static_cast<std::size_t>(X_.cols()) != hyper_.kernel.input_dim())
        throw ShapeError("input dimension does not match the kernel");

    offsets_.resize(static_cast<std::size_t>(n) + 1, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = entries_[static_cast<std::size_t>(i)];
        for (std::size_t a = 0; a < e.size(); ++a)
            if (e[a] < 0 || e[a] >= T || (a > 0 && e[a] <= e[a - 1]))
                throw ShapeError("observed entries must be ascending indices below T");
        offsets_[static_cast<std::size_t>(i) + 1] = offsets_[static_cast<std::size_t>(i)] + static_cast<Eigen::Index>(e.size());
    }
    const Eigen::Index total = offsets_.back();
    if (observations.size() != total)
        throw ShapeError("expected " + std::to_string(total) + " observed values, got " + std::to_string(observations.size()));

    const Eigen::VectorXd mu = hyper_.mean_vector();
    residual_ = std::move(observations);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = entries_[static_cast<std::size_t>(i)];
        for (std::size_t a = 0; a < e.size(); ++a) residual_(offsets_[static_cast<std::size_t>(i)] + static_cast<Eigen::Index>(a)) -= mu(e[a]);
    }
    if (n == 0) return;

    // Sigma = sigma^2 E K_n E^T + tau^2 I, assembled block by block.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(total, total);
    const auto& kern = hyper_.kernel;
    for (std::size_t c = 0; c < kern.components().size(); ++c) {
        const Eigen::VectorXd& a = kern.loading(c);
        std::vector<Eigen::VectorXd> sel(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& e = entries_[static_cast<std::size_t>(i)];
            sel[static_cast<std::size_t>(i)] = a(e);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd xi = X_.row(i).transpose();
            for (Eigen::Index j = i; j < n; ++j) {
                const double kap = kern.component_base(c, xi, X_.row(j).transpose());
                const auto& si = sel[static_cast<std::size_t>(i)];
                const auto& sj = sel[static_cast<std::size_t>(j)];
                G.block(offsets_[static_cast<std::size_t>(i)], offsets_[static_cast<std::size_t>(j)], si.size(), sj.size()) +=
                    kap * si * sj.transpose();
            }
        }
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j) {
            const auto oi = offsets_[static_cast<std::size_t>(i)], oj = offsets_[static_cast<std::size_t>(j)];
            const auto ki = offsets_[static_cast<std::size_t>(i) + 1] - oi, kj = offsets_[static_cast<std::size_t>(j) + 1] - oj;
            G.block(oi, oj, ki, kj) = G.block(oj, oi, kj, ki).transpose();
        }
    Eigen::MatrixXd sigma = hyper_.signal_variance * G;
    sigma.diagonal().array() += hyper_.noise_variance;
    chol_ = factorize_jittered(sigma);
    gram_ = std::move(G);
    alpha_ = chol_->solve(residual_);
}

Eigen::MatrixXd GpConditioner::observed_cross(const Eigen::VectorXd& x) const {
    const auto T = static_cast<Eigen::Index>(hyper_.kernel.output_size());
    const Eigen::Index n = X_.rows();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(offsets_.back(), T);
    const auto& kern = hyper_.kernel;
    for (std::size_t c = 0; c < kern.components().size(); ++c) {
        const Eigen::VectorXd& a = kern.loading(c);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& e = entries_[static_cast<std::size_t>(i)];
            const double kap = kern.component_base(c, X_.row(i).transpose(), x);
            C.block(offsets_[static_cast<std::size_t>(i)], 0, static_cast<Eigen::Index>(e.size()), T) +=
                kap * a(e) * a.transpose();
        }
    }
    return C;
}

Posterior GpConditioner::latent(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != hyper_.kernel.input_dim()) throw ShapeError("query has wrong input dimension");
    const double s2 = hyper_.signal_variance;
    Posterior p;
    p.mean = hyper_.mean_vector();
    p.cov = s2 * hyper_.kernel.eval(x, x);
    if (!chol_) return p;
    const Eigen::MatrixXd C = observed_cross(x);
    p.mean.noalias() += s2 * (C.transpose() * alpha_);
    const Eigen::MatrixXd V = chol_->llt.matrixL().solve(C);
    p.cov.noalias() -= (s2 * s2) * (V.transpose() * V);
    p.cov = symmetrize(p.cov);
    return p;
}

Eigen::MatrixXd GpConditioner::latent_cross_cov(const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const {
    const double s2 = hyper_.signal_variance;
    Eigen::MatrixXd cov = s2 * hyper_.kernel.eval(x, xp);
    if (!chol_) return cov;
    const Eigen::MatrixXd V = chol_->llt.matrixL().solve(observed_cross(x));
    const Eigen::MatrixXd Vp = chol_->llt.matrixL().solve(observed_cross(xp));
    cov.noalias() -= (s2 * s2) * (V.transpose() * Vp);
    return cov;
}

double GpConditioner::log_marginal_likelihood() const {
    if (!chol_) return 0.0;
    return -0.5 * chol_->log_det() - 0.5 * residual_.dot(alpha_);
}

HyperGradient GpConditioner::log_marginal_likelihood_gradient() const {
    HyperGradient g;
    g.kernel = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hyper_.kernel.num_params()));
    if (!chol_) return g;
    const Eigen::Index total = offsets_.back();
    const Eigen::Index n = X_.rows();
    const auto T = static_cast<Eigen::Index>(hyper_.kernel.output_size());
    const double s2 = hyper_.signal_variance;

    // dlogL/dp = 1/2 tr(W dSigma/dp) with W = alpha alpha^T - Sigma^{-1}.
    Eigen::MatrixXd W = alpha_ * alpha_.transpose();
    W -= chol_->solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(total, total)));
    g.noise_variance = 0.5 * W.trace();

    Eigen::MatrixXd lifted = Eigen::MatrixXd::Zero(n * T, n * T);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& ei = entries_[static_cast<std::size_t>(i)];
            const auto& ej = entries_[static_cast<std::size_t>(j)];
            const auto oi = offsets_[static_cast<std::size_t>(i)], oj = offsets_[static_cast<std::size_t>(j)];
            for (std::size_t a = 0; a < ei.size(); ++a)
                for (std::size_t b = 0; b < ej.size(); ++b)
                    lifted(i * T + ei[a], j * T + ej[b]) = W(oi + static_cast<Eigen::Index>(a), oj + static_cast<Eigen::Index>(b));
        }
    g.signal_variance = 0.5 * W.cwiseProduct(gram_).sum();
    g.kernel = 0.5 * s2 * contract_gram_gradient(hyper_.kernel, X_, lifted);
    return g;
}

// ---------------------------------------------------------------------------
// TogpModel

struct TogpModel::Kronecker {
    Eigen::VectorXd input_eigenvalues;  // of K_x, clamped at 0
    Eigen::MatrixXd input_vectors;
    Eigen::VectorXd output_eigenvalues;  // of vec(A) vec(A)^T, clamped at 0
    Eigen::MatrixXd output_vectors;
    Eigen::MatrixXd alpha;  // T x n, Sigma^{-1} (Y - 1 (x) mu) reshaped
    double log_det = 0.0;
    double quad = 0.0;
};

TogpModel::TogpModel(TogpHyper hyper, Dataset data, SolverKind solver)
    : hyper_(std::move(hyper)), data_(std::move(data)), solver_(solver) {
    hyper_.validate();
    data_.validate(hyper_.kernel.output_size());
    if (solver_ == SolverKind::Dense || data_.size() == 0) {
        dense_.emplace(hyper_, data_.X, full_entries(data_.size(), hyper_.kernel.output_size()), data_.Y);
        return;
    }
    if (hyper_.kernel.kind() != TensorKernel::Kind::Separable)
        throw std::invalid_argument("the Kronecker solver requires a separable kernel");

    const auto n = static_cast<Eigen::Index>(data_.size());
    const auto T = static_cast<Eigen::Index>(hyper_.kernel.output_size());
    const auto& base = hyper_.kernel.components().front().bases.front();
    const Eigen::VectorXd& a = hyper_.kernel.loading(0);
    Eigen::MatrixXd Kx(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) Kx(i, j) = base.eval(data_.X.row(i).transpose(), data_.X.row(j).transpose());

    auto kron = std::make_shared<Kronecker>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(Kx);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(a * a.transpose());
    kron->input_eigenvalues = ex.eigenvalues().cwiseMax(0.0);
    kron->input_vectors = ex.eigenvectors();
    kron->output_eigenvalues = eb.eigenvalues().cwiseMax(0.0);
    kron->output_vectors = eb.eigenvectors();

    const double s2 = hyper_.signal_variance, t2 = hyper_.noise_variance;
    Eigen::MatrixXd R = Eigen::Map<const Eigen::MatrixXd>(data_.Y.data(), T, n);
    R.colwise() -= hyper_.mean_vector();
    Eigen::MatrixXd Rt = kron->output_vectors.transpose() * R * kron->input_vectors;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index t = 0; t < T; ++t) {
            const double e = s2 * kron->input_eigenvalues(i) * kron->output_eigenvalues(t) + t2;
            kron->log_det += std::log(e);
            Rt(t, i) /= e;
        }
    kron->alpha = kron->output_vectors * Rt * kron->input_vectors.transpose();
    kron->quad = R.cwiseProduct(kron->alpha).sum();
    kron_ = std::move(kron);
}

Posterior TogpModel::posterior(const Eigen::VectorXd& x) const {
    if (dense_) return dense_->latent(x);
    const auto& base = hyper_.kernel.components().front().bases.front();
    const Eigen::VectorXd& a = hyper_.kernel.loading(0);
    const auto n = static_cast<Eigen::Index>(data_.size());
    const double s2 = hyper_.signal_variance, t2 = hyper_.noise_variance;
    Eigen::VectorXd kx(n);
    for (Eigen::Index i = 0; i < n; ++i) kx(i) = base.eval(data_.X.row(i).transpose(), x);

    Posterior p;
    p.mean = hyper_.mean_vector() + s2 * a * a.dot(kron_->alpha * kx);
    const Eigen::VectorXd w = kron_->input_vectors.transpose() * kx;
    const Eigen::VectorXd& d = kron_->output_eigenvalues;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(d.size());
    for (Eigen::Index t = 0; t < d.size(); ++t)
        for (Eigen::Index i = 0; i < n; ++i)
            coef(t) += w(i) * w(i) * d(t) * d(t) / (s2 * kron_->input_eigenvalues(i) * d(t) + t2);
    const Eigen::MatrixXd& V = kron_->output_vectors;
    p.cov = s2 * base.eval(x, x) * a * a.transpose() - (s2 * s2) * V * coef.asDiagonal() * V.transpose();
    p.cov = symmetrize(p.cov);
    return p;
}

Eigen::MatrixXd TogpModel::posterior_cross_cov(const Eigen::VectorXd& x, const Eigen::VectorXd& xp) const {
    if (dense_) return dense_->latent_cross_cov(x, xp);
    GpConditioner cond(hyper_, data_.X, full_entries(data_.size(), hyper_.kernel.output_size()), data_.Y);
    return cond.latent_cross_cov(x, xp);
}

double TogpModel::log_marginal_likelihood() const {
    if (dense_) return dense_->log_marginal_likelihood();
    return -0.5 * kron_->log_det - 0.5 * kron_->quad;
}

HyperGradient TogpModel::log_marginal_likelihood_gradient() const {
    if (dense_) return dense_->log_marginal_likelihood_gradient();
    GpConditioner cond(hyper_, data_.X, full_entries(data_.size(), hyper_.kernel.output_size()), data_.Y);
    return cond.log_marginal_likelihood_gradient();
}

Posterior posterior(const TogpHyper& h, const Dataset& data, const Eigen::VectorXd& x) {
    return TogpModel(h, data).posterior(x);
}

double log_marginal_likelihood(const TogpHyper& h, const Dataset& data) {
    return TogpModel(h, data).log_marginal_likelihood();
}

HyperGradient grad_log_marginal_likelihood(const TogpHyper& h, const Dataset& data) {
    return TogpModel(h, data).log_marginal_likelihood_gradient();
}

// ---------------------------------------------------------------------------
// Fitting

Eigen::VectorXd to_search_space(const TogpHyper& h) {
    const auto& k = h.kernel;
    const Eigen::VectorXd kp = k.params();
    const auto nl = static_cast<Eigen::Index>(k.num_lengthscales());
    Eigen::VectorXd z(2 + kp.size());
    z(0) = std::log(h.noise_variance);
    z(1) = std::log(h.signal_variance);
    z.segment(2, nl) = kp.head(nl).array().log().matrix();
    z.tail(kp.size() - nl) = kp.tail(kp.size() - nl);
    return z;
}

TogpHyper from_search_space(const TogpHyper& like, const Eigen::VectorXd& z) {
    TogpHyper h = like;
    const auto nl = static_cast<Eigen::Index>(like.kernel.num_lengthscales());
    const Eigen::Index np = static_cast<Eigen::Index>(like.kernel.num_params());
    if (z.size() != 2 + np) throw ShapeError("search-space vector has wrong length");
    h.noise_variance = std::exp(z(0));
    h.signal_variance = std::exp(z(1));
    Eigen::VectorXd kp(np);
    kp.head(nl) = z.segment(2, nl).array().exp().matrix();
    kp.tail(np - nl) = z.tail(np - nl);
    h.kernel.set_params(kp);
    return h;
}

FitResult fit_hyperparameters(const TogpHyper& init, const ConditionerFactory& make, const FitOptions& opts) {
    init.validate();
    const auto nl = static_cast<Eigen::Index>(init.kernel.num_lengthscales());
    const bool normalize = opts.normalize_core && init.kernel.kind() == TensorKernel::Kind::Separable;

    const double lo_var = std::log(opts.min_variance), hi_var = std::log(opts.max_variance);
    const double lo_noise = std::log(opts.min_noise_variance);
    const double lo_ls = std::log(opts.min_lengthscale), hi_ls = std::log(opts.max_lengthscale);
    // The box is enforced by rejecting outside points, so line searches stay inside it.
    auto in_bounds = [&](const Eigen::VectorXd& z) {
        if (z(0) < lo_noise || z(0) > hi_var || z(1) < lo_var || z(1) > hi_var) return false;
        for (Eigen::Index i = 0; i < nl; ++i)
            if (z(2 + i) < lo_ls || z(2 + i) > hi_ls) return false;
        return true;
    };

    auto objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) -> double {
        if (!z.allFinite() || !in_bounds(z)) return std::numeric_limits<double>::infinity();
        try {
            const TogpHyper h = from_search_space(init, z);
            const Eigen::VectorXd kp = h.kernel.params();
            if (!(h.noise_variance > 0.0 && h.signal_variance > 0.0 && std::isfinite(h.noise_variance) &&
                  std::isfinite(h.signal_variance) && (kp.head(nl).array() > 0.0).all() && kp.allFinite()))
                return std::numeric_limits<double>::infinity();
            const GpConditioner cond = make(h);
            const double ll = cond.log_marginal_likelihood();
            if (grad) {
                const HyperGradient g = cond.log_marginal_likelihood_gradient();
                grad->resize(z.size());
                (*grad)(0) = -h.noise_variance * g.noise_variance;
                (*grad)(1) = -h.signal_variance * g.signal_variance;
                grad->segment(2, nl) = -(kp.head(nl).array() * g.kernel.head(nl).array()).matrix();
                grad->tail(z.size() - 2 - nl) = -g.kernel.tail(g.kernel.size() - nl);
            }
            return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    auto project = [&](Eigen::VectorXd& z) {
        z(0) = std::clamp(z(0), lo_noise, hi_var);
        z(1) = std::clamp(z(1), lo_var, hi_var);
        for (Eigen::Index i = 0; i < nl; ++i) z(2 + i) = std::clamp(z(2 + i), lo_ls, hi_ls);
        if (normalize) {
            TogpHyper h = from_search_space(init, z);
            const double n2 = h.kernel.normalize_component(0);
            if (n2 > 0.0) {
                h.signal_variance *= n2;
                z = to_search_space(h);
                z(1) = std::clamp(z(1), lo_var, hi_var);
            }
        }
    };

    FitResult res;
    res.initial_log_likelihood = make(init).log_marginal_likelihood();
    const LbfgsResult opt = minimize_lbfgs(objective, to_search_space(init), opts.lbfgs, project);
    res.iterations = opt.iterations;
    res.converged = opt.converged;
    res.status = opt.status;
    for (double v : opt.trace) res.trace.push_back(-v);
    if (std::isfinite(opt.value) && -opt.value >= res.initial_log_likelihood) {
        res.hyper = from_search_space(init, opt.x);
        res.log_likelihood = -opt.value;
    } else {
        res.hyper = init;
        res.log_likelihood = res.initial_log_likelihood;
    }
    return res;
}

FitResult fit(const Dataset& data, const TogpHyper& init, const FitOptions& opts) {
    data.validate(init.kernel.output_size());
    const EntryLists entries = full_entries(data.size(), init.kernel.output_size());
    return fit_hyperparameters(
        init, [&](const TogpHyper& h) { return GpConditioner(h, data.X, entries, data.Y); }, opts);
}

// ---------------------------------------------------------------------------
// Rank selection

TensorKernel with_core_spec(const TensorKernel& k, const CoreSpec& spec) {
    const auto& shape = k.shape();
    if (k.kind() == TensorKernel::Kind::Separable)
        return TensorKernel::separable(shape, uniform_core(spec, shape), k.components().front().bases.front());
    std::vector<CoreTensorParam> cores;
    std::vector<std::vector<BaseKernel>> bases;
    for (const auto& comp : k.components()) {
        cores.push_back(uniform_core(spec, shape));
        bases.push_back(comp.bases);
    }
    return TensorKernel::non_separable(shape, std::move(cores), std::move(bases));
}

double mean_relative_error(std::span<const Eigen::VectorXd> truth, std::span<const Eigen::VectorXd> predicted,
                           std::size_t* excluded) {
    if (truth.size() != predicted.size()) throw ShapeError("relative error needs paired vectors");
    std::size_t skipped = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i].size() != predicted[i].size()) throw ShapeError("relative error needs equal-length vectors");
        double s = 0.0;
        for (Eigen::Index j = 0; j < truth[i].size(); ++j) {
            if (std::abs(truth[i](j)) < 1e-12) {
                ++skipped;
                continue;
            }
            const double r = (truth[i](j) - predicted[i](j)) / truth[i](j);
            s += r * r;
        }
        total += std::sqrt(s);
    }
    if (excluded) *excluded = skipped;
    return truth.empty() ? 0.0 : total / static_cast<double>(truth.size());
}

RankSelection select_rank(const Dataset& data, const TogpHyper& init, std::span<const CoreSpec> candidates,
                          const RankSelectionOptions& opts) {
    if (candidates.empty()) throw std::invalid_argument("rank selection needs at least one candidate");
    RankSelection out;
    if (candidates.size() == 1) {
        out.best = candidates.front();
        out.candidates.push_back({candidates.front(), 0.0, 0, true, {}});
        return out;
    }
    const auto T = static_cast<Eigen::Index>(init.kernel.output_size());
    data.validate(static_cast<std::size_t>(T));
    const std::size_t n = data.size();
    auto n_test = static_cast<std::size_t>(std::lround(opts.holdout_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n > 1 ? n - 1 : 1);
    if (n < 2) throw std::invalid_argument("rank selection needs at least two observations");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(opts.seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng() % i)]);
    const std::size_t n_train = n - n_test;

    Dataset train;
    train.X.resize(static_cast<Eigen::Index>(n_train), data.X.cols());
    train.Y.resize(static_cast<Eigen::Index>(n_train) * T);
    for (std::size_t i = 0; i < n_train; ++i) {
        train.X.row(static_cast<Eigen::Index>(i)) = data.X.row(static_cast<Eigen::Index>(perm[i]));
        train.Y.segment(static_cast<Eigen::Index>(i) * T, T) = data.Y.segment(static_cast<Eigen::Index>(perm[i]) * T, T);
    }

    for (const auto& spec : candidates) {
        RankCandidateResult r;
        r.spec = spec;
        try {
            TogpHyper h = init;
            h.kernel = with_core_spec(init.kernel, spec);
            for (const auto& comp : h.kernel.components()) r.param_count += param_count(comp.core);
            const FitResult fr = fit(train, h, opts.fit);
            const TogpModel model(fr.hyper, train);
            std::vector<Eigen::VectorXd> truth, pred;
            for (std::size_t i = n_train; i < n; ++i) {
                const auto row = static_cast<Eigen::Index>(perm[i]);
                truth.push_back(data.Y.segment(row * T, T));
                pred.push_back(model.posterior(data.X.row(row).transpose()).mean);
            }
            r.mae = mean_relative_error(truth, pred);
            r.ok = std::isfinite(r.mae);
            if (!r.ok) r.error = "non-finite MAE";
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
        out.candidates.push_back(std::move(r));
    }

    double best_mae = std::numeric_limits<double>::infinity();
    for (const auto& r : out.candidates)
        if (r.ok) best_mae = std::min(best_mae, r.mae);
    if (!std::isfinite(best_mae)) throw NumericalError("every rank candidate failed to fit");
    const RankCandidateResult* chosen = nullptr;
    for (const auto& r : out.candidates) {
        if (!r.ok || r.mae > best_mae * (1.0 + opts.tie_tolerance)) continue;
        if (!chosen || r.param_count < chosen->param_count) chosen = &r;
    }
    out.best = chosen->spec;
    return out;
}

// ---------------------------------------------------------------------------
// Nystrom

NystromResult nystrom_posterior(const TogpHyper& h, const Dataset& data, const Eigen::VectorXd& x,
                                const NystromConfig& cfg) {
    if (!cfg.enabled) throw std::invalid_argument("Nystrom approximation is disabled in this configuration");
    if (!(cfg.variance_threshold > 0.0 && cfg.variance_threshold <= 1.0))
        throw std::invalid_argument("Nystrom variance threshold must lie in (0, 1]");
    h.validate();
    const auto T = static_cast<Eigen::Index>(h.kernel.output_size());
    data.validate(static_cast<std::size_t>(T));
    NystromResult out;
    const double s2 = h.signal_variance;
    const Eigen::VectorXd mu = h.mean_vector();
    if (data.size() == 0) {
        out.posterior = {mu, s2 * h.kernel.eval(x, x)};
        return out;
    }

    const Eigen::MatrixXd K = gram(h.kernel, data.X);
    const Eigen::Index N = K.rows();
    std::size_t nl = cfg.landmarks == 0 ? static_cast<std::size_t>(N) : cfg.landmarks;
    if (nl > static_cast<std::size_t>(N)) {
        out.clamped = true;
        nl = static_cast<std::size_t>(N);
    }
    std::vector<Eigen::Index> idx(nl);
    if (cfg.sampling == NystromConfig::Landmarks::Strided) {
        for (std::size_t i = 0; i < nl; ++i)
            idx[i] = static_cast<Eigen::Index>((i * static_cast<std::size_t>(N)) / nl);
    } else {
        std::vector<Eigen::Index> all(static_cast<std::size_t>(N));
        std::iota(all.begin(), all.end(), Eigen::Index{0});
        std::mt19937_64 rng(cfg.seed);
        for (std::size_t i = 0; i < nl; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (all.size() - i));
            std::swap(all[i], all[j]);
        }
        idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(nl));
        std::sort(idx.begin(), idx.end());
    }
    out.landmarks = nl;

    const Eigen::MatrixXd C = K(Eigen::all, idx);
    const Eigen::MatrixXd Wl = K(idx, idx);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Wl);
    const Eigen::VectorXd lam = es.eigenvalues().reverse();
    const Eigen::MatrixXd U = es.eigenvectors().rowwise().reverse();
    const double tol = 1e-12 * std::max(lam(0), 0.0);
    Eigen::Index positive = 0;
    while (positive < lam.size() && lam(positive) > tol) ++positive;
    Eigen::Index rank = positive;
    if (positive > 0) {
        const double total = lam.head(positive).sum();
        double cum = 0.0;
        for (Eigen::Index l = 0; l < positive; ++l) {
            cum += lam(l);
            if (cum / total >= cfg.variance_threshold - 1e-12) {
                rank = l + 1;
                break;
            }
        }
    }
    out.rank = static_cast<std::size_t>(rank);

    // K_n ~ F F^T with F = C U_r Lambda_r^{-1/2}; Woodbury for (F F^T + eta I)^{-1}.
    const double eta = h.eta();
    const Eigen::MatrixXd F =
        C * U.leftCols(rank) * lam.head(rank).cwiseSqrt().cwiseInverse().asDiagonal();
    Eigen::MatrixXd inner = F.transpose() * F;
    inner.diagonal().array() += eta;
    const JitteredCholesky small = factorize_jittered(inner);
    auto apply_inverse = [&](const Eigen::MatrixXd& B) -> Eigen::MatrixXd {
        return (B - F * small.solve(Eigen::MatrixXd(F.transpose() * B))) / eta;
    };

    Eigen::VectorXd resid = data.Y;
    for (std::size_t i = 0; i < data.size(); ++i) resid.segment(static_cast<Eigen::Index>(i) * T, T) -= mu;
    const Eigen::MatrixXd Kx = cross_gram(h.kernel, data.X, x);
    out.posterior.mean = mu + Kx.transpose() * apply_inverse(resid);
    out.posterior.cov = symmetrize(s2 * (h.kernel.eval(x, x) - Kx.transpose() * apply_inverse(Kx)));
    return out;
}

}  // namespace tobo
