#pragma once

// Exact lattice checks of the normalization and cancellation identities. The
// mutual-information integrand is expanded with gamma stripped and Q kept
// symbolic: every contraction with k B-pairs contributes Q^k, so each
// contribution lands in a cell indexed by (gamma order, Q power, prefactor kind).

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "mi_formulas.hpp"
#include "wick.hpp"
#include "wick_builders.hpp"

namespace nlsemi {

struct VerificationReport {
    std::string name;
    bool passed = false;
    double residual = 0.0;  ///< largest scale-relative residual among the asserted quantities
    double scale = 0.0;
    std::vector<std::pair<std::string, double>> values;
    std::string detail;
};

struct VerifyOptions {
    /// Detector check: when nonzero, adds corrupt * scale(S1) to the coefficients of
    /// B0 B0* X0 X0* and X0 X0* X0 X0* in S1, terms that an exact expansion cancels.
    double corrupt = 0.0;
    double threshold = 1e-12;     ///< scale-relative zero threshold
};

/// normalization_log multiplies M log(1 + P/(QL)), output_quadratic multiplies
/// 1/(P + QL); the other two pieces carry no extra Q dependence.
enum class Piece { normalization_log, output_quadratic, noise_quadratic, alpha_square };

struct CellKey {
    int gamma_order;
    int q_power;
    Piece piece;
    bool operator<(const CellKey& o) const {
        return std::tie(gamma_order, q_power, piece) < std::tie(o.gamma_order, o.q_power, o.piece);
    }
};

/// Gamma-stripped expressions shared by the verification routines.
struct SymbolicModel {
    ChannelParams params;
    WickExpression neg_s1;      ///< -S1 / gamma
    WickExpression g10_gamma;   ///< gamma10 * gamma_tilde / gamma
    WickExpression neg_s2;      ///< -S2 / gamma^2
    WickExpression out_energy;  ///< delta sum |X + B|^2
    WickExpression b_energy;    ///< delta sum |B|^2 / L
    double gt_per_gamma = 0.0;

    static SymbolicModel build(const ChannelParams& c, const VerifyOptions& opt = {}, bool with_s2 = true) {
        if (c.grid.m_total != c.grid.m_inner) throw InvalidArgument("verification requires W' = W");
        SymbolicModel m;
        m.params = c;
        ExpressionBuilder b(c);
        m.gt_per_gamma = 1.0 / b.gamma_per_gamma_tilde();
        m.neg_s1 = (-1.0) * b.s1_unit();
        if (opt.corrupt != 0.0) {
            const double amp = opt.corrupt * std::max(m.neg_s1.scale(), 1.0);
            m.neg_s1.add(MonoKey::of({{FieldKind::B, 0}, {FieldKind::Bbar, 0}, {FieldKind::X, 0}, {FieldKind::Xbar, 0}}), amp);
            m.neg_s1.add(MonoKey::of({{FieldKind::X, 0}, {FieldKind::Xbar, 0}, {FieldKind::X, 0}, {FieldKind::Xbar, 0}}), amp);
        }
        m.g10_gamma = m.gt_per_gamma * b.gamma10();
        if (with_s2) m.neg_s2 = (-1.0) * b.s2_unit();
        const double d = c.grid.delta;
        for (int j = 0; j < c.grid.m_total; ++j) {
            const bool in = c.grid.is_inner(j);
            m.out_energy.add(MonoKey::of({{FieldKind::B, j}, {FieldKind::Bbar, j}}), d);
            m.b_energy.add(MonoKey::of({{FieldKind::B, j}, {FieldKind::Bbar, j}}), d / c.l);
            if (in) {
                m.out_energy.add(MonoKey::of({{FieldKind::X, j}, {FieldKind::Xbar, j}}), d);
                m.out_energy.add(MonoKey::of({{FieldKind::X, j}, {FieldKind::Bbar, j}}), d);
                m.out_energy.add(MonoKey::of({{FieldKind::Xbar, j}, {FieldKind::B, j}}), d);
            }
        }
        return m;
    }

    /// Covariances with Q = 1, so that B pairs can be counted as powers of Q.
    CovarianceModel unit_noise_covariance() const {
        ChannelParams c = params;
        c.q = 1.0;
        return CovarianceModel::standard(c);
    }
};

/// One product of expressions, with a numeric weight and a power of Q.
struct ProductTerm {
    double weight;
    int q_power;
    int gamma_order;
    std::vector<const WickExpression*> factors;
};

class LaurentTable {
public:
    void add(const CellKey& k, const Accum& a) { cells_[k].merge(a); }
    const std::map<CellKey, Accum>& cells() const { return cells_; }
    Accum cell(int g, int q, Piece p) const {
        auto it = cells_.find({g, q, p});
        return it == cells_.end() ? Accum{} : it->second;
    }

private:
    std::map<CellKey, Accum> cells_;
};

namespace detail {

inline std::vector<ProductTerm> alpha1_terms(const SymbolicModel& m) {
    return {{1.0, -1, 1, {&m.neg_s1}}, {1.0, 0, 1, {&m.g10_gamma}}};
}

inline std::vector<ProductTerm> alpha2_terms(const SymbolicModel& m, bool with_s2) {
    std::vector<ProductTerm> t{{0.5, -2, 2, {&m.neg_s1, &m.neg_s1}}, {1.0, -1, 2, {&m.neg_s1, &m.g10_gamma}}};
    if (with_s2) t.push_back({1.0, -1, 2, {&m.neg_s2}});
    return t;
}

inline void accumulate(LaurentTable& table, Piece piece, const ProductTerm& term, const CovarianceModel& cov) {
    std::vector<const WickExpression*> factors;
    for (const auto* e : term.factors)
        if (e) factors.push_back(e);
    for (const auto& [pairs, acc] : graded_expectation(factors, cov, Family::B)) {
        Accum a;
        a.merge(acc, term.weight);
        table.add({term.gamma_order, term.q_power + pairs, piece}, a);
    }
}

inline ProductTerm prepend(const ProductTerm& t, double weight, int q_power, const WickExpression* e) {
    ProductTerm r = t;
    r.weight *= weight;
    r.q_power += q_power;
    r.factors.insert(r.factors.begin(), e);
    return r;
}

}  // namespace detail

enum class TableScope { order_gamma1, order_gamma2 };

/// Laurent table of the mutual-information integrand at the requested gamma order.
inline LaurentTable mi_laurent_table(const SymbolicModel& m, TableScope scope, bool with_s2 = true,
                                     bool gamma10_only = false) {
    LaurentTable table;
    const CovarianceModel cov = m.unit_noise_covariance();
    const int mi = m.params.grid.m_inner;
    std::vector<ProductTerm> alpha;
    if (scope == TableScope::order_gamma1) {
        alpha = detail::alpha1_terms(m);
        if (gamma10_only) alpha.erase(alpha.begin());
    } else {
        alpha = detail::alpha2_terms(m, with_s2);
    }
    for (const auto& t : alpha) {
        detail::accumulate(table, Piece::normalization_log, detail::prepend(t, mi, 0, nullptr), cov);
        detail::accumulate(table, Piece::output_quadratic, detail::prepend(t, 1.0, 0, &m.out_energy), cov);
        detail::accumulate(table, Piece::noise_quadratic, detail::prepend(t, -1.0, -1, &m.b_energy), cov);
    }
    if (scope == TableScope::order_gamma2) {
        const auto a1 = detail::alpha1_terms(m);
        for (const auto& p : a1)
            for (const auto& q : a1) {
                ProductTerm t{0.5 * p.weight * q.weight, p.q_power + q.q_power, 2, p.factors};
                t.factors.insert(t.factors.end(), q.factors.begin(), q.factors.end());
                detail::accumulate(table, Piece::alpha_square, t, cov);
            }
    }
    return table;
}


/// Residuals are measured against the largest single contribution anywhere in the row.
inline VerificationReport report_zero_cells(const std::string& name, const LaurentTable& t, int gamma_order,
                                            int max_q_power, double threshold) {
    VerificationReport r;
    r.name = name;
    double worst = 0.0;
    int examined = 0;
    for (const auto& [k, a] : t.cells()) {
        if (k.gamma_order != gamma_order) continue;
        r.scale = std::max(r.scale, a.scale);
        if (k.q_power > max_q_power) continue;
        ++examined;
        worst = std::max(worst, std::abs(a.sum));
        r.values.push_back({"cell(q=" + std::to_string(k.q_power) + ",piece=" + std::to_string(static_cast<int>(k.piece)) + ")",
                            std::abs(a.sum)});
    }
    r.residual = r.scale > 0.0 ? worst / r.scale : 0.0;
    r.values.push_back({"cells_examined", double(examined)});
    r.passed = r.residual <= threshold;
    return r;
}

inline void require_verification_lattice(const ChannelParams& c, int max_modes, const char* who) {
    if (c.grid.m_total != c.grid.m_inner) throw InvalidArgument(std::string(who) + " requires W' = W");
    if (c.grid.m_total > max_modes) throw SizeGuard(std::string(who) + ": lattice too large");
}

/// Partial contraction over B of alpha1 must vanish identically as a polynomial in X.
inline VerificationReport verify_normalization(const ChannelParams& c, const VerifyOptions& opt = {}) {
    require_verification_lattice(c, 4, "verify_normalization");
    const SymbolicModel m = SymbolicModel::build(c, opt, false);
    const double gamma = c.gamma == 0.0 ? 1.0 : c.gamma;
    WickExpression alpha1 = (gamma / c.q) * m.neg_s1;
    alpha1 += gamma * m.g10_gamma;
    const WickExpression reduced = partial_contract(alpha1, family_bit(Family::B), CovarianceModel::standard(c));
    VerificationReport r;
    r.name = "normalization";
    r.scale = alpha1.scale();
    r.residual = r.scale > 0.0 ? reduced.max_coefficient() / r.scale : 0.0;
    r.values = {{"terms_in_alpha1", double(alpha1.size())}, {"max_residual_coefficient", reduced.max_coefficient()}};
    r.passed = r.residual <= opt.threshold;
    return r;
}

/// All order-gamma contributions to the MI vanish after contraction over B then X.
inline VerificationReport verify_order_gamma(const ChannelParams& c, const VerifyOptions& opt = {}) {
    require_verification_lattice(c, 4, "verify_order_gamma");
    const SymbolicModel m = SymbolicModel::build(c, opt, false);
    VerificationReport g10 = report_zero_cells("order_gamma(gamma10)", mi_laurent_table(m, TableScope::order_gamma1, false, true),
                                               1, 100, opt.threshold);
    VerificationReport all =
        report_zero_cells("order_gamma", mi_laurent_table(m, TableScope::order_gamma1, false), 1, 100, opt.threshold);
    all.values.push_back({"gamma10_subset_residual", g10.residual});
    all.passed = all.passed && g10.passed;
    all.residual = std::max(all.residual, g10.residual);
    return all;
}

/// The (gamma/eps)^k contributions carry compensating powers of Q: the Q^{-k} cells vanish.
inline VerificationReport verify_leading_singular(const ChannelParams& c, int k, const VerifyOptions& opt = {}) {
    if (k != 1 && k != 2) throw InvalidArgument("verify_leading_singular: k must be 1 or 2");
    require_verification_lattice(c, k == 2 ? 3 : 4, "verify_leading_singular");
    const SymbolicModel m = SymbolicModel::build(c, opt, k == 2);
    const auto table = mi_laurent_table(m, k == 1 ? TableScope::order_gamma1 : TableScope::order_gamma2, k == 2);
    return report_zero_cells("leading_singular_k" + std::to_string(k), table, k, -k, opt.threshold);
}

struct SingularCoefficients {
    double c1 = 0.0;            ///< gamma~^2/eps coefficient from (alpha1)^2 / 2, in units of gamma^2 / Q
    double c2 = 0.0;            ///< same from the log-ratio times (1 + alpha1 + alpha2)
    double scale = 0.0;
    double log_residual = 0.0;  ///< singular cells multiplying the log prefactor (must vanish)
    double c1_normalized = 0.0; ///< c1 / (4 M gamma~^2 / eps)
};

inline SingularCoefficients singular_coefficients(const SymbolicModel& m, bool with_s2 = true) {
    const auto t = mi_laurent_table(m, TableScope::order_gamma2, with_s2);
    const ChannelParams& c = m.params;
    SingularCoefficients s;
    const Accum d = t.cell(2, -1, Piece::alpha_square);
    Accum c2 = t.cell(2, -1, Piece::noise_quadratic);
    // 1/(P + QL) = (1/P) sum_n (-QL/P)^n: a Q^{q} cell reaches Q^{-1} with n = -1 - q.
    for (const auto& [k, a] : t.cells()) {
        if (k.gamma_order != 2) continue;
        if (k.piece == Piece::output_quadratic && k.q_power <= -1) {
            const int n = -1 - k.q_power;
            c2.merge(a, std::pow(-c.l / c.p, n) / c.p);
        }
        if (k.piece == Piece::normalization_log && k.q_power <= -1) {
            s.log_residual = std::max(s.log_residual, a.relative());
        }
    }
    s.c1 = d.sum.real();
    s.c2 = c2.sum.real();
    s.scale = std::max(d.scale, c2.scale);
    const double unit = m.gt_per_gamma * m.gt_per_gamma * c.p / c.l;
    s.c1_normalized = s.c1 / (4.0 * c.grid.m_inner * unit);
    return s;
}

/// c1 + c2 = 0 for the gamma~^2/eps coefficients of I1 and I2.
inline VerificationReport verify_singular_cancellation(const ChannelParams& c, const VerifyOptions& opt = {}) {
    require_verification_lattice(c, 3, "verify_singular_cancellation");
    const SymbolicModel m = SymbolicModel::build(c, opt, true);
    const auto s = singular_coefficients(m);
    VerificationReport r;
    r.name = "singular_cancellation";
    r.scale = s.scale;
    r.residual = std::max(s.scale > 0.0 ? std::abs(s.c1 + s.c2) / s.scale : 0.0, s.log_residual);
    const double bt = derived_params(c).beta_tilde;
    const int mi = c.grid.m_inner;
    r.values = {{"c1", s.c1},
                {"c2", s.c2},
                {"c1_over_4M", s.c1_normalized},
                {"g_discrete", c.closure == Closure::periodic ? g_function_discrete(bt, mi) : g_function_discrete_truncated(bt, mi)},
                {"log_residual", s.log_residual}};
    r.passed = r.residual <= opt.threshold;
    return r;
}

/// c1 alone (no S2 needed), usable on larger lattices.
inline double singular_i1_coefficient(const ChannelParams& c) {
    const SymbolicModel m = SymbolicModel::build(c, {}, false);
    return singular_coefficients(m, false).c1_normalized;
}

/// Exact I1 = <(alpha1)^2>/2 over P[X] P0[Y|X] at the given noise level.
inline double exact_i1(const ChannelParams& c) {
    const SymbolicModel m = SymbolicModel::build(c, {}, false);
    const auto t = mi_laurent_table(m, TableScope::order_gamma2, false);
    double s = 0.0;
    for (const auto& [k, a] : t.cells())
        if (k.gamma_order == 2 && k.piece == Piece::alpha_square) s += a.sum.real() * std::pow(c.q, k.q_power);
    return c.gamma * c.gamma * s;
}

/// I3 = -1/2 <beta1^2> over the output Gaussian.
inline double compute_i3(const ChannelParams& c) {
    if (c.grid.m_total > builder_mode_limit) throw SizeGuard("compute_i3 requires m_total <= 6");
    if (c.grid.m_total == c.grid.m_inner) return 0.0;
    const WickExpression b1 = build_beta1_expr(c);
    const auto g = graded_expectation({&b1, &b1}, CovarianceModel::standard(c), Family::Y);
    cplx s{};
    for (const auto& [k, a] : g) s += a.sum;
    return -0.5 * s.real();
}

/// Order-gamma^0 part of the MI from the symbolic normalization factors.
inline double compute_i0(const ChannelParams& c) {
    const SymbolicModel m = SymbolicModel::build(c, {}, false);
    const CovarianceModel cov = CovarianceModel::standard(c);
    const double ql = c.q * c.l;
    return c.grid.m_inner * std::log1p(c.p / ql) + wick_expectation(m.out_energy, cov).real() / (c.p + ql) -
           wick_expectation(m.b_energy, cov).real() / c.q;
}

}  // namespace nlsemi
