#include "tobo/core_tensor.hpp"

#include <cmath>

#include "tobo/error.hpp"

namespace tobo {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::size_t tt_core_size(const TtCore& tt, std::size_t j, const TensorShape& shape) {
    return tt.ranks[j] * shape.dim(j) * tt.ranks[j + 1];
}

// Left partial contractions L_j (P_j x r_j) with P_j = t_1 ... t_j, rows first-mode-fastest.
std::vector<Eigen::MatrixXd> tt_left(const TtCore& tt, const TensorShape& shape) {
    const std::size_t m = shape.modes();
    std::vector<Eigen::MatrixXd> left(m + 1);
    left[0] = Eigen::MatrixXd::Ones(1, 1);
    for (std::size_t j = 0; j < m; ++j) {
        const auto& prev = left[j];
        const Eigen::Index rows_prev = prev.rows();
        const std::size_t ra = tt.ranks[j], t = shape.dim(j), rb = tt.ranks[j + 1];
        const auto& g = tt.cores[j];
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(rows_prev * static_cast<Eigen::Index>(t),
                                                     static_cast<Eigen::Index>(rb));
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t b = 0; b < rb; ++b)
                for (std::size_t a = 0; a < ra; ++a) {
                    const double w = g[a + ra * (i + t * b)];
                    if (w == 0.0) continue;
                    next.block(static_cast<Eigen::Index>(i) * rows_prev, static_cast<Eigen::Index>(b),
                               rows_prev, 1) += w * prev.col(static_cast<Eigen::Index>(a));
                }
        left[j + 1] = std::move(next);
    }
    return left;
}

// Right partial contractions R_j (r_{j-1} x Q_j) with Q_j = t_j ... t_m, columns first-mode-fastest.
// right[j] holds R for modes j..m-1 (0-based); right[m] = [1].
std::vector<Eigen::MatrixXd> tt_right(const TtCore& tt, const TensorShape& shape) {
    const std::size_t m = shape.modes();
    std::vector<Eigen::MatrixXd> right(m + 1);
    right[m] = Eigen::MatrixXd::Ones(1, 1);
    for (std::size_t jj = m; jj-- > 0;) {
        const auto& nxt = right[jj + 1];
        const Eigen::Index cols_next = nxt.cols();
        const std::size_t ra = tt.ranks[jj], t = shape.dim(jj), rb = tt.ranks[jj + 1];
        const auto& g = tt.cores[jj];
        Eigen::MatrixXd cur = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ra),
                                                    static_cast<Eigen::Index>(t) * cols_next);
        for (Eigen::Index q = 0; q < cols_next; ++q)
            for (std::size_t i = 0; i < t; ++i)
                for (std::size_t a = 0; a < ra; ++a) {
                    double s = 0.0;
                    for (std::size_t b = 0; b < rb; ++b)
                        s += g[a + ra * (i + t * b)] * nxt(static_cast<Eigen::Index>(b), q);
                    cur(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i) + static_cast<Eigen::Index>(t) * q) = s;
                }
        right[jj] = std::move(cur);
    }
    return right;
}

}  // namespace

std::string to_string(CoreKind kind) {
    switch (kind) {
        case CoreKind::Full: return "full";
        case CoreKind::CP: return "cp";
        case CoreKind::TT: return "tt";
    }
    return "full";
}

CoreKind core_kind_from_string(const std::string& s) {
    if (s == "full") return CoreKind::Full;
    if (s == "cp") return CoreKind::CP;
    if (s == "tt") return CoreKind::TT;
    throw std::invalid_argument("unknown core kind '" + s + "' (expected full, cp or tt)");
}

void validate_core(const CoreTensorParam& p, const TensorShape& shape) {
    const std::size_t m = shape.modes();
    std::visit(overloaded{
                   [&](const FullCore& f) {
                       if (static_cast<std::size_t>(f.entries.size()) != shape.total())
                           throw ShapeError("full core has " + std::to_string(f.entries.size()) +
                                            " entries, shape needs " + std::to_string(shape.total()));
                   },
                   [&](const CpCore& c) {
                       if (c.rank == 0) throw ShapeError("CP rank must be positive");
                       if (c.factors.size() != c.rank * m)
                           throw ShapeError("CP core needs rank * modes factor vectors");
                       for (std::size_t r = 0; r < c.rank; ++r)
                           for (std::size_t i = 0; i < m; ++i)
                               if (static_cast<std::size_t>(c.factors[r * m + i].size()) != shape.dim(i))
                                   throw ShapeError("CP factor length does not match mode size");
                   },
                   [&](const TtCore& t) {
                       if (t.ranks.size() != m + 1) throw ShapeError("TT core needs modes + 1 ranks");
                       if (t.ranks.front() != 1 || t.ranks.back() != 1)
                           throw ShapeError("TT boundary ranks must be 1");
                       if (t.cores.size() != m) throw ShapeError("TT core needs one core per mode");
                       for (std::size_t j = 0; j < m; ++j) {
                           if (t.ranks[j] == 0) throw ShapeError("TT ranks must be positive");
                           if (t.cores[j].size() != tt_core_size(t, j, shape))
                               throw ShapeError("TT core " + std::to_string(j) + " has wrong size");
                       }
                   },
               },
               p);
}

Eigen::VectorXd materialize_core(const CoreTensorParam& p, const TensorShape& shape) {
    validate_core(p, shape);
    const std::size_t m = shape.modes();
    const auto total = static_cast<Eigen::Index>(shape.total());
    return std::visit(
        overloaded{
            [&](const FullCore& f) -> Eigen::VectorXd { return f.entries; },
            [&](const CpCore& c) -> Eigen::VectorXd {
                Eigen::VectorXd out = Eigen::VectorXd::Zero(total);
                std::vector<std::size_t> idx(m, 0);
                for (Eigen::Index lin = 0; lin < total; ++lin) {
                    double s = 0.0;
                    for (std::size_t r = 0; r < c.rank; ++r) {
                        double prod = 1.0;
                        for (std::size_t i = 0; i < m; ++i)
                            prod *= c.factors[r * m + i](static_cast<Eigen::Index>(idx[i]));
                        s += prod;
                    }
                    out(lin) = s;
                    for (std::size_t i = 0; i < m && ++idx[i] == shape.dim(i); ++i) idx[i] = 0;
                }
                return out;
            },
            [&](const TtCore& t) -> Eigen::VectorXd { return tt_left(t, shape)[m].col(0); },
        },
        p);
}

std::size_t param_count(const CoreTensorParam& p) {
    return std::visit(overloaded{
                          [](const FullCore& f) { return static_cast<std::size_t>(f.entries.size()); },
                          [](const CpCore& c) {
                              std::size_t n = 0;
                              for (const auto& v : c.factors) n += static_cast<std::size_t>(v.size());
                              return n;
                          },
                          [](const TtCore& t) {
                              std::size_t n = 0;
                              for (const auto& g : t.cores) n += g.size();
                              return n;
                          },
                      },
                      p);
}

Eigen::MatrixXd core_jacobian(const CoreTensorParam& p, const TensorShape& shape) {
    validate_core(p, shape);
    const std::size_t m = shape.modes();
    const auto total = static_cast<Eigen::Index>(shape.total());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(total, static_cast<Eigen::Index>(param_count(p)));
    std::visit(
        overloaded{
            [&](const FullCore&) { jac.setIdentity(); },
            [&](const CpCore& c) {
                std::vector<Eigen::Index> offset(c.rank * m);
                Eigen::Index off = 0;
                for (std::size_t q = 0; q < c.rank * m; ++q) {
                    offset[q] = off;
                    off += c.factors[q].size();
                }
                std::vector<std::size_t> idx(m, 0);
                for (Eigen::Index lin = 0; lin < total; ++lin) {
                    for (std::size_t r = 0; r < c.rank; ++r)
                        for (std::size_t i = 0; i < m; ++i) {
                            double prod = 1.0;
                            for (std::size_t o = 0; o < m; ++o)
                                if (o != i) prod *= c.factors[r * m + o](static_cast<Eigen::Index>(idx[o]));
                            jac(lin, offset[r * m + i] + static_cast<Eigen::Index>(idx[i])) += prod;
                        }
                    for (std::size_t i = 0; i < m && ++idx[i] == shape.dim(i); ++i) idx[i] = 0;
                }
            },
            [&](const TtCore& t) {
                const auto left = tt_left(t, shape);
                const auto right = tt_right(t, shape);
                Eigen::Index off = 0;
                for (std::size_t j = 0; j < m; ++j) {
                    const auto& lp = left[j];       // P_{j-1} x r_{j-1}
                    const auto& rn = right[j + 1];  // r_j x Q_{j+1}
                    const std::size_t ra = t.ranks[j], tj = shape.dim(j), rb = t.ranks[j + 1];
                    const Eigen::Index P = lp.rows(), Q = rn.cols();
                    for (Eigen::Index q = 0; q < Q; ++q)
                        for (std::size_t i = 0; i < tj; ++i)
                            for (Eigen::Index pl = 0; pl < P; ++pl) {
                                const Eigen::Index lin =
                                    pl + P * (static_cast<Eigen::Index>(i) + static_cast<Eigen::Index>(tj) * q);
                                for (std::size_t b = 0; b < rb; ++b)
                                    for (std::size_t a = 0; a < ra; ++a) {
                                        const auto col = off + static_cast<Eigen::Index>(a + ra * (i + tj * b));
                                        jac(lin, col) = lp(pl, static_cast<Eigen::Index>(a)) *
                                                        rn(static_cast<Eigen::Index>(b), q);
                                    }
                            }
                    off += static_cast<Eigen::Index>(t.cores[j].size());
                }
            },
        },
        p);
    return jac;
}

Eigen::VectorXd core_params(const CoreTensorParam& p) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(param_count(p)));
    Eigen::Index pos = 0;
    std::visit(overloaded{
                   [&](const FullCore& f) { out = f.entries; },
                   [&](const CpCore& c) {
                       for (const auto& v : c.factors) {
                           out.segment(pos, v.size()) = v;
                           pos += v.size();
                       }
                   },
                   [&](const TtCore& t) {
                       for (const auto& g : t.cores)
                           for (double w : g) out(pos++) = w;
                   },
               },
               p);
    return out;
}

void set_core_params(CoreTensorParam& p, const Eigen::VectorXd& values) {
    if (static_cast<std::size_t>(values.size()) != param_count(p))
        throw ShapeError("core parameter vector has wrong length");
    Eigen::Index pos = 0;
    std::visit(overloaded{
                   [&](FullCore& f) { f.entries = values; },
                   [&](CpCore& c) {
                       for (auto& v : c.factors) {
                           v = values.segment(pos, v.size());
                           pos += v.size();
                       }
                   },
                   [&](TtCore& t) {
                       for (auto& g : t.cores)
                           for (double& w : g) w = values(pos++);
                   },
               },
               p);
}

void scale_core(CoreTensorParam& p, std::size_t modes, double c) {
    std::visit(overloaded{
                   [&](FullCore& f) { f.entries *= c; },
                   [&](CpCore& cp) {
                       const double s = std::pow(c, 1.0 / static_cast<double>(modes));
                       for (auto& v : cp.factors) v *= s;
                   },
                   [&](TtCore& t) {
                       const double s = std::pow(c, 1.0 / static_cast<double>(t.cores.size()));
                       for (auto& g : t.cores)
                           for (double& w : g) w *= s;
                   },
               },
               p);
}

CoreKind kind_of(const CoreTensorParam& p) {
    return std::visit(overloaded{
                          [](const FullCore&) { return CoreKind::Full; },
                          [](const CpCore&) { return CoreKind::CP; },
                          [](const TtCore&) { return CoreKind::TT; },
                      },
                      p);
}

CoreSpec spec_of(const CoreTensorParam& p) {
    CoreSpec s;
    s.kind = kind_of(p);
    if (const auto* c = std::get_if<CpCore>(&p)) s.cp_rank = c->rank;
    if (const auto* t = std::get_if<TtCore>(&p)) s.tt_ranks = t->ranks;
    return s;
}

namespace {

template <class Gen>
CoreTensorParam build_core(const CoreSpec& spec, const TensorShape& shape, Gen&& gen) {
    const std::size_t m = shape.modes();
    switch (spec.kind) {
        case CoreKind::Full: {
            Eigen::VectorXd e(static_cast<Eigen::Index>(shape.total()));
            for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = gen(0);
            return FullCore{e};
        }
        case CoreKind::CP: {
            CpCore c;
            c.rank = spec.cp_rank;
            for (std::size_t r = 0; r < c.rank; ++r)
                for (std::size_t i = 0; i < m; ++i) {
                    Eigen::VectorXd v(static_cast<Eigen::Index>(shape.dim(i)));
                    for (Eigen::Index q = 0; q < v.size(); ++q) v(q) = gen(1);
                    c.factors.push_back(v);
                }
            return c;
        }
        case CoreKind::TT: {
            TtCore t;
            t.ranks = spec.tt_ranks;
            if (t.ranks.size() != m + 1) throw ShapeError("TT core needs modes + 1 ranks");
            for (std::size_t j = 0; j < m; ++j) {
                std::vector<double> g(t.ranks[j] * shape.dim(j) * t.ranks[j + 1]);
                for (double& w : g) w = gen(2);
                t.cores.push_back(std::move(g));
            }
            return t;
        }
    }
    throw ShapeError("unknown core kind");
}

}  // namespace

CoreTensorParam uniform_core(const CoreSpec& spec, const TensorShape& shape) {
    // Every parameter equal; chosen so the materialized tensor has unit norm
    // when the rank is 1. Higher ranks get a mild deterministic perturbation
    // so that rank components are not identical.
    std::size_t counter = 0;
    auto p = build_core(spec, shape, [&](int) {
        const double jitter = 0.05 * std::sin(1.0 + static_cast<double>(counter++));
        return 1.0 + jitter;
    });
    const double norm = materialize_core(p, shape).norm();
    if (norm > 0.0) scale_core(p, shape.modes(), 1.0 / norm);
    validate_core(p, shape);
    return p;
}

CoreTensorParam random_core(const CoreSpec& spec, const TensorShape& shape, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> normal(0.0, scale);
    auto p = build_core(spec, shape, [&](int) { return normal(rng); });
    validate_core(p, shape);
    return p;
}

}  // namespace tobo
