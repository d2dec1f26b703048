#pragma once

// Lattice expressions for the action functionals and expansion coefficients as
// polynomials in X, B (or Y). Every z-integral is performed exactly through
// ExpCalculus, so the expressions carry no quadrature error.

#include <numbers>
#include <vector>

#include "domain.hpp"
#include "mixing.hpp"
#include "polynomial.hpp"
#include "wick.hpp"

namespace nlsemi {

inline constexpr int builder_mode_limit = 6;

class ExpressionBuilder {
public:
    explicit ExpressionBuilder(const ChannelParams& c)
        : c_(c), tab_(c), calc_(mixing_kappa(c)), d_(c.grid.delta) {
        if (c.grid.m_total > builder_mode_limit) throw SizeGuard("expression builders require m_total <= 6");
    }

    const ChannelParams& params() const { return c_; }
    ExpCalculus& calculus() { return calc_; }

    /// a_k(t) = t B_k + X_k, with X restricted to the inner band.
    TimeExpression a(int k) const {
        TimeExpression e = TimeExpression::term(MonoKey::of({{FieldKind::B, k}}), ExpPoly::monomial(1.0, 1, 0));
        if (c_.grid.is_inner(k)) e.add(MonoKey::of({{FieldKind::X, k}}), ExpPoly::constant(1.0));
        return e;
    }
    TimeExpression b(int k) const { return TimeExpression::term(MonoKey::of({{FieldKind::B, k}}), ExpPoly::constant(1.0)); }

    /// out += w(t) * p * q * r, where r is already conjugated by the caller.
    static void add_triple(TimeExpression& out, const ExpPoly& w, const TimeExpression& p, const TimeExpression& q,
                           const TimeExpression& r) {
        for (const auto& [k1, c1] : p.terms()) {
            const ExpPoly w1 = w * c1;
            for (const auto& [k2, c2] : q.terms()) {
                const ExpPoly w2 = w1 * c2;
                const MonoKey k12 = k1 * k2;
                for (const auto& [k3, c3] : r.terms()) out.add(k12 * k3, w2 * c3);
            }
        }
    }

    /// sum over quartets with output index j of delta^2 e^{-i kappa m t} f1(j1) f2(j2) conj(f3(j3)).
    template <class F1, class F2, class F3>
    TimeExpression kerr_sum(int j, F1&& f1, F2&& f2, F3&& f3) const {
        TimeExpression out;
        for (int k = tab_.begin(j); k < tab_.end(j); ++k) {
            const Quartet& q = tab_[k];
            add_triple(out, ExpPoly::monomial(d_ * d_, 0, -q.m), f1(q.j1), f2(q.j2), f3(q.j3).conj());
        }
        return out;
    }

    WickExpression integrate(const TimeExpression& e) {
        return e.map_coefficients([this](const ExpPoly& p) { return calc_.integrate01(p); });
    }
    TimeExpression antiderivative(const TimeExpression& e) const {
        return e.map_coefficients([this](const ExpPoly& p) { return calc_.antiderivative(p); });
    }
    static TimeExpression times(const TimeExpression& e, const ExpPoly& w) {
        return e.map_coefficients([&w](const ExpPoly& p) { return w * p; });
    }
    static TimeExpression constant_in_t(const WickExpression& e) {
        return e.map_coefficients([](const cplx& v) { return ExpPoly::constant(v); });
    }

    TimeExpression n_field(int j) const {
        auto fa = [this](int k) { return a(k); };
        return kerr_sum(j, fa, fa, fa);
    }

    /// R_j = delta^2 sum e^{-mu t} (2 B1 a2 conj(a3) - a1 a2 conj(B3)).
    TimeExpression r_field(int j) const {
        auto fa = [this](int k) { return a(k); };
        auto fb = [this](int k) { return b(k); };
        TimeExpression r = kerr_sum(j, fb, fa, fa);
        r *= 2.0;
        TimeExpression s = kerr_sum(j, fa, fa, fb);
        s *= -1.0;
        r += s;
        return r;
    }

    /// S1 with gamma = 1.
    WickExpression s1_unit() {
        TimeExpression acc;
        for (int j = 0; j < c_.grid.m_total; ++j) acc += b(j) * n_field(j).conj();
        const WickExpression i = integrate(acc);
        WickExpression r = i + (-1.0) * i.conj();
        r *= cplx{0.0, d_};
        return r;
    }

    /// S2 with gamma = 1.
    WickExpression s2_unit() {
        const int mt = c_.grid.m_total;
        const ExpPoly t = ExpPoly::monomial(1.0, 1, 0), tm1 = ExpPoly::monomial(1.0, 1, 0) + ExpPoly::constant(-1.0);
        std::vector<TimeExpression> u(static_cast<std::size_t>(mt));
        TimeExpression square, cross;
        for (int j = 0; j < mt; ++j) {
            const TimeExpression n = n_field(j), r = r_field(j);
            const TimeExpression nbar = constant_in_t(integrate(n));
            const TimeExpression a_r = antiderivative(r);
            // d = u_z - N = -Nbar + int_0^1 s R ds - int_t^1 R ds
            TimeExpression dj = (-1.0) * nbar;
            dj += constant_in_t(integrate(times(r, t)));
            dj += (-1.0) * constant_in_t(integrate(r));
            dj += a_r;
            square += dj * dj.conj();
            // u / L = int_0^t N - t Nbar + (t-1) int_0^t s R + t int_t^1 (s-1) R
            const TimeExpression r_t = times(r, t), r_tm1 = times(r, tm1);
            TimeExpression uj = antiderivative(n);
            uj += times((-1.0) * nbar, t);
            uj += times(antiderivative(r_t), tm1);
            uj += times(constant_in_t(integrate(r_tm1)), t);
            uj += times((-1.0) * antiderivative(r_tm1), t);
            uj *= c_.l;
            u[static_cast<std::size_t>(j)] = std::move(uj);
        }
        auto fa = [this](int k) { return a(k); };
        auto fu = [&u](int k) { return u[static_cast<std::size_t>(k)]; };
        for (int j = 0; j < mt; ++j) {
            TimeExpression k = kerr_sum(j, fu, fa, fa);
            k *= 2.0;
            TimeExpression k2 = kerr_sum(j, fa, fa, fu);
            k2 *= -1.0;
            k += k2;
            const TimeExpression bk = b(j) * k.conj();
            cross += bk;
            cross += bk.conj();
        }
        WickExpression r = integrate(square);
        r *= c_.l * d_;
        WickExpression x = integrate(cross);
        x *= d_;
        r += x;
        return r;
    }

    double gamma_per_gamma_tilde() const { return 2.0 * std::numbers::pi / (c_.p * c_.l * c_.grid.w_inner); }

    WickExpression gamma10() const {
        const double p_ave = derived_params(c_).p_ave;
        const double pref = c_.grid.w_total / (3.0 * std::numbers::pi * p_ave) * d_;
        WickExpression e;
        for (int j = c_.grid.inner_begin(); j < c_.grid.inner_end(); ++j) {
            e.add(MonoKey::of({{FieldKind::B, j}, {FieldKind::Xbar, j}}), pref / cplx{0.0, 2.0});
            e.add(MonoKey::of({{FieldKind::Bbar, j}, {FieldKind::X, j}}), -pref / cplx{0.0, 2.0});
        }
        return e;
    }

    WickExpression beta1() {
        const FrequencyGrid& g = c_.grid;
        const double ql = c_.q * c_.l, pq = c_.p + ql, r = ql / pq;
        const double pref = 2.0 * c_.gamma * c_.p / (ql * pq) * d_ * d_ * d_;
        WickExpression e;
        if (pref == 0.0) return e;
        auto chi = [&](int j) { return g.is_inner(j) ? 1.0 : 0.0; };
        auto coef = [&](int k) {  // c_k(t) as a polynomial in t
            return g.is_inner(k) ? ExpPoly::constant(1.0 - r) + ExpPoly::monomial(r, 1, 0) : ExpPoly::monomial(1.0, 1, 0);
        };
        for (const Quartet& q : tab_.quartets()) {
            const double bracket = (1.0 - chi(q.j)) * chi(q.j1) - (1.0 - chi(q.j1)) * chi(q.j);
            if (bracket == 0.0) continue;
            const ExpPoly w = ExpPoly::monomial(1.0, 0, q.m) * coef(q.j2) * coef(q.j3);
            const cplx tint = std::polar(1.0, -calc_.kappa() * q.m) * calc_.integrate01(w);
            e.add(MonoKey::of({{FieldKind::Y, q.j}, {FieldKind::Y, q.j3}, {FieldKind::Ybar, q.j1}, {FieldKind::Ybar, q.j2}}),
                  pref * bracket * tint / cplx{0.0, 2.0});
        }
        return e;
    }

private:
    ChannelParams c_;
    MixingTable tab_;
    ExpCalculus calc_;
    double d_;
};

inline WickExpression build_s1_expr(const ChannelParams& c) {
    if (c.gamma == 0.0) return {};
    ExpressionBuilder b(c);
    return c.gamma * b.s1_unit();
}

inline WickExpression build_alpha01_expr(const ChannelParams& c) {
    ExpressionBuilder b(c);
    return (-(c.l / c.p) * b.gamma_per_gamma_tilde()) * b.s1_unit();
}

inline WickExpression build_gamma10_expr(const ChannelParams& c) { return ExpressionBuilder(c).gamma10(); }

inline WickExpression build_alpha11_expr(const ChannelParams& c) {
    ExpressionBuilder b(c);
    const double g = b.gamma_per_gamma_tilde();
    return (-(c.l / c.p) * g * g) * b.s2_unit();
}

inline WickExpression build_s2_expr(const ChannelParams& c) {
    if (c.gamma == 0.0) return {};
    ExpressionBuilder b(c);
    return (c.gamma * c.gamma) * b.s2_unit();
}

inline WickExpression build_beta1_expr(const ChannelParams& c) { return ExpressionBuilder(c).beta1(); }

inline FieldValues field_values(const Spectrum& x, const Spectrum& b) { return {x.values, b.values, {}}; }

}  // namespace nlsemi
