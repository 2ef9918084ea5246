// Both optimization loops share one code path so that a CBBO run over a
// single-entry tensor reproduces the plain BO run exactly.

#include <cmath>
#include <limits>
#include <random>

#include "tobo/error.hpp"
#include "tobo/linalg.hpp"
#include "tobo/sampling.hpp"
#include "tobo/tobo.hpp"
#include "tobo/tocbbo.hpp"

namespace tobo {
namespace {

struct CbboPart {
    std::size_t k;
    RhoSchedule rho;
    SuperarmMode mode;
};

SelectionVector random_superarm(std::size_t T, std::size_t k, std::mt19937_64& rng) {
    std::vector<Eigen::Index> all(T);
    for (std::size_t i = 0; i < T; ++i) all[i] = static_cast<Eigen::Index>(i);
    for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + static_cast<std::size_t>(rng() % (T - i))]);
    std::vector<Eigen::Index> pick(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(pick.begin(), pick.end());
    return SelectionVector::from_indices(T, pick);
}

class Loop {
public:
    Loop(const TensorProblem& problem, const LoopConfig& cfg, const CbboPart* cbbo, const RecordSink& sink)
        : problem_(problem), cfg_(cfg), cbbo_(cbbo), sink_(sink), T_(problem.output_size()),
          d_(problem.domain().dim()), noise_(stream_seed(cfg.seed, Stream::Noise)),
          arms_(stream_seed(cfg.seed, Stream::Arms)) {
        cfg_.scalarization.validate(T_);
        cfg_.beta.validate();
        if (cbbo_) {
            cbbo_->rho.validate();
            if (cbbo_->k < 1 || cbbo_->k > T_)
                throw ConfigError("k", "k = " + std::to_string(cbbo_->k) + " must lie in [1, " + std::to_string(T_) + "]");
        }
        kernel_ = make_kernel(cfg_.surrogate.kernel, problem_.shape(), problem_.domain(),
                              cfg_.surrogate.initial_lengthscale_fraction);
        X_.resize(0, static_cast<Eigen::Index>(d_));
    }

    RunResult run() {
        try {
            std::mt19937_64 design(stream_seed(cfg_.seed, Stream::Design));
            const Eigen::MatrixXd X0 = latin_hypercube(cfg_.n0, problem_.domain(), design);
            for (Eigen::Index i = 0; i < X0.rows(); ++i) {
                const SelectionVector lam = cbbo_ ? random_superarm(T_, cbbo_->k, arms_) : SelectionVector::all(T_);
                observe(X0.row(i).transpose(), lam, true, 0.0, 0.0);
            }
            for (std::size_t t = 1; t <= cfg_.N; ++t) {
                if (cfg_.fail_after && t > cfg_.fail_after) throw NumericalError("run stopped by fail_after");
                step(t);
            }
        } catch (const NumericalError& e) {
            result_.failed = true;
            result_.failure = e.what();
        }
        return std::move(result_);
    }

private:
    EntryLists entries() const {
        EntryLists out;
        for (const auto& r : result_.records) out.push_back(r.selection.indices());
        return out;
    }

    GpConditioner condition(const TogpHyper& h, const EntryLists& e) const { return GpConditioner(h, X_, e, Y_); }

    TogpHyper refit(std::size_t t, const EntryLists& e) {
        TogpHyper fresh = initial_hyper(kernel_, e, Y_, cfg_.surrogate);
        TogpHyper start = fresh;
        if (hyper_) {
            start = *hyper_;
            start.prior_mean = fresh.prior_mean;
        }
        if (X_.rows() == 0) return start;
        const std::size_t every = std::max<std::size_t>(cfg_.surrogate.refit_every, 1);
        if (hyper_ && (t - 1) % every != 0) return start;
        auto factory = [&](const TogpHyper& h) { return condition(h, e); };
        const double var = fresh.noise_variance / cfg_.surrogate.initial_noise_fraction;
        const FitOptions fo = resolve_fit_options(cfg_.surrogate, problem_.domain(), var);
        try {
            return fit_hyperparameters(start, factory, fo).hyper;
        } catch (const NumericalError&) {
            if (!hyper_) throw;
        }
        return fit_hyperparameters(fresh, factory, fo).hyper;
    }

    void step(std::size_t t) {
        const EntryLists e = entries();
        hyper_ = refit(t, e);
        result_.hyper = hyper_;
        const GpConditioner model = condition(*hyper_, e);
        const std::size_t n = result_.records.size();
        const Scalarization& s = cfg_.scalarization;

        SelectionVector incumbent = SelectionVector::all(T_);
        if (cbbo_)
            incumbent = n > 0 ? result_.records[result_.best].selection : random_superarm(T_, cbbo_->k, arms_);
        const auto inc_idx = incumbent.indices();

        double c_n = 1.0;
        if (cfg_.beta.needs_cn()) {
            auto cov_at = [&](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
                return model.latent(x).cov(inc_idx, inc_idx);
            };
            c_n = estimate_cn(cov_at, problem_.domain(), 256, stream_seed(cfg_.seed, Stream::Cn, t));
        }
        const double beta = cfg_.beta(n, d_, c_n);

        Acquisition acq;
        if (cbbo_)
            acq = [&](const Eigen::VectorXd& x) {
                return ucb_partial(s, restrict_posterior(model.latent(x), incumbent), incumbent, beta);
            };
        else
            acq = [&](const Eigen::VectorXd& x) { return ucb(s, model.latent(x), beta); };
        const Eigen::VectorXd x =
            maximize_acquisition(acq, problem_.domain(), cfg_.search, stream_seed(cfg_.seed, Stream::Search, t)).x;

        SelectionVector lam = SelectionVector::all(T_);
        double rho = 0.0;
        if (cbbo_) {
            rho = cbbo_->rho(t, T_);
            lam = select_superarm(model.latent(x), cbbo_->k, s, rho, cbbo_->mode).lambda;
        }
        observe(x, lam, false, beta, rho);
    }

    void observe(const Eigen::VectorXd& x, const SelectionVector& lam, bool initial, double beta, double rho) {
        const auto idx = lam.indices();
        RunRecord r;
        r.round = result_.records.size() + 1;
        r.initial = initial;
        r.x = x;
        r.selection = lam;
        r.y = problem_.evaluate_partial(x, lam, noise_);
        r.scalarized = cfg_.scalarization.partial(r.y, idx);
        r.beta = beta;
        r.rho = rho;
        if (result_.records.empty() || r.scalarized > result_.records[result_.best].scalarized)
            result_.best = result_.records.size();
        r.incumbent = result_.records.empty() ? r.scalarized : std::max(r.scalarized, result_.records.back().incumbent);
        if (cfg_.optimum) {
            const Eigen::VectorXd f = problem_.truth(x)(idx);
            r.regret = *cfg_.optimum - cfg_.scalarization.partial(f, idx);
            const double prev = result_.records.empty() ? 0.0 : result_.records.back().cumulative_regret.value_or(0.0);
            r.cumulative_regret = prev + *r.regret;
        }

        X_.conservativeResize(X_.rows() + 1, Eigen::NoChange);
        X_.row(X_.rows() - 1) = x.transpose();
        Y_.conservativeResize(Y_.size() + r.y.size());
        Y_.tail(r.y.size()) = r.y;
        result_.records.push_back(std::move(r));
        if (sink_) sink_(result_.records.back());
    }

    const TensorProblem& problem_;
    LoopConfig cfg_;
    const CbboPart* cbbo_;
    const RecordSink& sink_;
    std::size_t T_;
    std::size_t d_;
    std::mt19937_64 noise_;
    std::mt19937_64 arms_;
    TensorKernel kernel_;
    Eigen::MatrixXd X_;
    Eigen::VectorXd Y_;
    std::optional<TogpHyper> hyper_;
    RunResult result_;
};

}  // namespace

RunResult run_tobo(const TensorProblem& problem, const ToboConfig& cfg, const RecordSink& sink) {
    return Loop(problem, cfg, nullptr, sink).run();
}

RunResult run_tocbbo(const TensorProblem& problem, const TocbboConfig& cfg, const RecordSink& sink) {
    const CbboPart part{cfg.k, cfg.rho, cfg.mode};
    return Loop(problem, cfg.loop, &part, sink).run();
}

}  // namespace tobo
