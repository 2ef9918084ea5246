#include "tobo/tobo.hpp"

#include <cmath>
#include <limits>

#include "tobo/error.hpp"
#include "tobo/linalg.hpp"
#include "tobo/sampling.hpp"

namespace tobo {

double ucb(const Scalarization& s, const Posterior& post, double beta) {
    return s(post.mean) + beta * std::sqrt(spectral_norm_psd(post.cov));
}

double ucb_partial(const Scalarization& s, const PartialPosterior& post, const SelectionVector& lambda, double beta) {
    const auto idx = lambda.indices();
    return s.partial(post.mean, idx) + beta * std::sqrt(spectral_norm_psd(post.cov));
}

AcquisitionMax maximize_acquisition(const Acquisition& acq, const InputDomain& domain, const SearchConfig& cfg,
                                    std::uint64_t seed) {
    const std::size_t starts = cfg.starts ? cfg.starts : 32 * domain.dim();
    const Eigen::MatrixXd P = halton_points(starts, domain, seed);
    AcquisitionMax best;
    best.value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < starts; ++i) {
        const BoxSearchResult r = maximize_in_box(acq, domain, P.row(static_cast<Eigen::Index>(i)).transpose(), cfg.local);
        if (best.x.size() == 0 || r.value > best.value) {
            best.x = r.x;
            best.value = r.value;
            best.start = i;
        }
    }
    return best;
}

Eigen::VectorXd select_input(const TogpModel& model, const InputDomain& domain, const Scalarization& s, double beta,
                             const SearchConfig& cfg, std::uint64_t seed) {
    auto acq = [&](const Eigen::VectorXd& x) { return ucb(s, model.posterior(x), beta); };
    return maximize_acquisition(acq, domain, cfg, seed).x;
}

void BetaSchedule::validate() const {
    auto nonneg = [](double v, const char* field) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be finite and nonnegative");
    };
    nonneg(c0, "beta.c0");
    nonneg(c1, "beta.c1");
    nonneg(r, "beta.r");
    nonneg(a, "beta.a");
    nonneg(b, "beta.b");
    nonneg(c_grad, "beta.c_grad");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("beta.delta", "must lie in (0, 1)");
}

double BetaSchedule::operator()(std::size_t n, std::size_t d, double c_n) const {
    if (kind == Kind::Practical) return c0 + c1 * std::sqrt(std::log(static_cast<double>(n) + 1.0));
    const double nn = static_cast<double>(std::max<std::size_t>(n, 1));
    const double dd = static_cast<double>(d);
    const double q = r * dd * nn * nn * (b * std::sqrt(std::log(dd * a / delta)) + c_grad) / delta;
    const double tail = 2.0 * dd * std::log(q);
    return std::sqrt(std::max(c_n, 0.0)) + (form == Form::Printed ? tail : std::sqrt(std::max(tail, 0.0)));
}

double estimate_cn(const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& cov_at, const InputDomain& domain,
                   std::size_t points, std::uint64_t seed) {
    const Eigen::MatrixXd P = halton_points(points, domain, seed);
    double best = 1.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const Eigen::MatrixXd C = cov_at(P.row(i).transpose());
        const double top = spectral_norm_psd(C);
        if (top <= 0.0) continue;
        best = std::max(best, std::max(C.trace(), 0.0) / top);
    }
    return best;
}

double information_gain(const TensorKernel& k, const Eigen::MatrixXd& X, double eta) {
    if (X.rows() == 0) throw std::invalid_argument("information gain needs a nonempty design");
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    Eigen::MatrixXd M = gram(k, X) / eta;
    M.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(M));
    if (llt.info() != Eigen::Success) throw NumericalError("I + K_N / eta is not positive definite");
    return llt.matrixLLT().diagonal().array().log().sum();
}

TensorKernel make_kernel(const KernelSpec& spec, const TensorShape& shape, const InputDomain& domain,
                         double lengthscale_fraction) {
    BaseKernel base{spec.family, lengthscale_fraction * (domain.upper - domain.lower)};
    if (spec.kind == TensorKernel::Kind::Separable) return TensorKernel::separable(shape, uniform_core(spec.core, shape), base);
    std::vector<CoreTensorParam> cores;
    std::vector<std::vector<BaseKernel>> bases;
    for (std::size_t l = 0; l < shape.modes(); ++l) {
        cores.push_back(uniform_core(spec.core, shape));
        bases.emplace_back(shape.dim(l), base);
    }
    return TensorKernel::non_separable(shape, std::move(cores), std::move(bases));
}

TogpHyper initial_hyper(const TensorKernel& kernel, const EntryLists& entries, const Eigen::VectorXd& Y,
                        const SurrogateConfig& cfg) {
    const auto T = static_cast<Eigen::Index>(kernel.output_size());
    TogpHyper h;
    h.kernel = kernel;
    h.prior_mean = Eigen::VectorXd::Zero(T);

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(T), count = Eigen::VectorXd::Zero(T);
    Eigen::Index pos = 0;
    for (const auto& e : entries)
        for (auto j : e) {
            sum(j) += Y(pos++);
            count(j) += 1.0;
        }
    if (cfg.center_outputs && pos > 0) {
        const double global = sum.sum() / static_cast<double>(pos);
        for (Eigen::Index j = 0; j < T; ++j) h.prior_mean(j) = count(j) > 0 ? sum(j) / count(j) : global;
    }
    double var = 0.0;
    pos = 0;
    for (const auto& e : entries)
        for (auto j : e) {
            const double r = Y(pos++) - h.prior_mean(j);
            var += r * r;
        }
    var = pos > 1 ? var / static_cast<double>(pos) : 0.0;
    if (!(var > 1e-12) || !std::isfinite(var)) var = 1.0;

    // Unit-norm cores spread sigma^2 over T entries; each non-separable
    // component adds t_l base kernels on top.
    double spread = static_cast<double>(T);
    if (kernel.kind() == TensorKernel::Kind::NonSeparable) {
        double bases = 0.0;
        for (const auto& c : kernel.components()) bases += static_cast<double>(c.bases.size());
        spread /= bases;
    }
    h.signal_variance = var * spread;
    h.noise_variance = cfg.initial_noise_fraction * var;
    return h;
}

FitOptions resolve_fit_options(const SurrogateConfig& cfg, const InputDomain& domain, double sample_variance) {
    FitOptions fo = cfg.fit;
    const Eigen::VectorXd width = domain.upper - domain.lower;
    fo.min_lengthscale = cfg.min_lengthscale_fraction * width.minCoeff();
    fo.max_lengthscale = cfg.max_lengthscale_fraction * width.maxCoeff();
    fo.min_noise_variance = std::max(cfg.min_noise_fraction * sample_variance, fo.min_noise_variance);
    return fo;
}

std::uint64_t stream_seed(std::uint64_t seed, Stream s, std::uint64_t index) {
    return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(s)), index);
}

}  // namespace tobo
