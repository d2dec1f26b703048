#pragma once

#include <cmath>
#include <numbers>

#include "domain.hpp"
#include "mixing.hpp"
#include "quadrature.hpp"
#include "trajectory.hpp"

namespace nlsemi {

enum class DerivativePath { automatic, finite_difference };

/// L0[psi] = d psi/dz - i beta w^2 psi on the lattice.
inline TrajectoryField linop_l0(const TrajectoryField& f, const ChannelParams& c,
                                DerivativePath path = DerivativePath::automatic) {
    require_shape(f, c);
    TrajectoryField out(f.n_z, f.m_total, f.l);
    if (path == DerivativePath::automatic && f.linear_drive) {
        for (int n = 0; n <= f.n_z; ++n)
            for (int j = 0; j < f.m_total; ++j)
                out(n, j) = std::polar(1.0, dispersion_phase(c, j, c.z(n))) * (*f.linear_drive)[j] / c.l;
        return out;
    }
    const double h = c.dz();
    const int nz = f.n_z;
    for (int j = 0; j < f.m_total; ++j) {
        const double w = c.grid.omega(j);
        for (int n = 0; n <= nz; ++n) {
            cplx d;
            if (n == 0) d = (-3.0 * f(0, j) + 4.0 * f(1, j) - f(2, j)) / (2.0 * h);
            else if (n == nz) d = (3.0 * f(nz, j) - 4.0 * f(nz - 1, j) + f(nz - 2, j)) / (2.0 * h);
            else d = (f(n + 1, j) - f(n - 1, j)) / (2.0 * h);
            out(n, j) = d - cplx{0.0, c.beta * w * w} * f(n, j);
        }
    }
    return out;
}

/// Cubic Kerr term V_j = i gamma delta^2 sum psi_{j1} psi_{j2} conj(psi_{j3}) at one z row.
inline Spectrum v_of(const TrajectoryField& f, const ChannelParams& c, int z_index) {
    require_shape(f, c);
    const MixingTable tab(c);
    const CVec row = f.row(z_index);
    CVec v = mix(tab, c.grid.delta, 0.0, 0.0, row, row, row);
    for (auto& e : v) e *= cplx{0.0, c.gamma};
    return Spectrum(c.grid, std::move(v));
}

inline double s0(const Spectrum& b, const ChannelParams& c) { return band_energy(b, Band::all) / c.l; }

namespace detail {

inline ChannelParams with_unit_gamma(ChannelParams c) {
    c.gamma = 1.0;
    return c;
}

// The functionals below work in the interaction frame psi = e^{i beta w^2 z} a,
// where V[psi] = i gamma e^{i beta w^2 z} N with N_j = delta^2 sum e^{-i kappa m t} a1 a2 conj(a3).
// For the truncated closure this is an exact rewrite of the lab-frame expressions;
// for the periodic closure it defines the cyclic lattice model.

inline CVec drive_row(const Spectrum& x, const Spectrum& b, double t) {
    CVec a(static_cast<std::size_t>(x.size()));
    for (int j = 0; j < x.size(); ++j) a[j] = t * b[j] + x[j];
    return a;
}

/// S1 evaluated with gamma = 1 (S1 is linear in gamma).
inline double s1_unit(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    require_same_grid(x.grid, c.grid);
    require_same_grid(b.grid, c.grid);
    const MixingTable tab(c);
    const double kappa = mixing_kappa(c);
    const auto w = quad::trapezoid_weights(c.n_z, c.l);
    double acc = 0.0;
    for (int n = 0; n <= c.n_z; ++n) {
        const double t = c.z(n) / c.l;
        const CVec a = drive_row(x, b, t);
        const CVec nn = mix(tab, c.grid.delta, kappa, t, a, a, a);
        double s = 0.0;
        for (int j = 0; j < c.grid.m_total; ++j) s += std::real(b[j] / c.l * std::conj(cplx{0.0, 1.0} * nn[j]));
        acc += w[n] * c.grid.delta * s;
    }
    return -2.0 * acc;
}

/// S2 evaluated with gamma = 1 (S2 is quadratic in gamma).
inline double s2_unit(const Spectrum& x, const Spectrum& b, const ChannelParams& c0) {
    const ChannelParams c = with_unit_gamma(c0);
    const FirstOrder fo = first_order(x, b, c);
    const MixingTable tab(c);
    const double d = c.grid.delta, kappa = mixing_kappa(c);
    const auto w = quad::trapezoid_weights(c.n_z, c.l);
    const cplx i1{0.0, 1.0};
    const int mt = c.grid.m_total;
    double acc = 0.0;
    CVec p1(static_cast<std::size_t>(mt)), dp1(static_cast<std::size_t>(mt));
    for (int n = 0; n <= c.n_z; ++n) {
        const double z = c.z(n), t = z / c.l;
        for (int j = 0; j < mt; ++j) {
            const cplx strip = std::polar(1.0, -dispersion_phase(c, j, z));
            p1[j] = fo.psi1(n, j) * strip;
            dp1[j] = fo.l0_psi1(n, j) * strip;
        }
        const CVec a = drive_row(x, b, t);
        const CVec nn = mix(tab, d, kappa, t, a, a, a);
        const CVec va = mix(tab, d, kappa, t, p1, a, a);
        const CVec vb = mix(tab, d, kappa, t, a, a, p1);
        double s = 0.0;
        for (int j = 0; j < mt; ++j) {
            const cplx v1 = i1 * (2.0 * va[j] + vb[j]);
            s += std::norm(dp1[j] - i1 * nn[j]) - 2.0 * std::real(b[j] / c.l * std::conj(v1));
        }
        acc += w[n] * d * s;
    }
    return acc;
}

/// gamma / gamma_tilde = 2 pi / (P L W).
inline double gamma_per_gamma_tilde(const ChannelParams& c) {
    return 2.0 * std::numbers::pi / (c.p * c.l * c.grid.w_inner);
}

}  // namespace detail

/// First-order action term, -2 int dz delta sum Re{L0[Psi0] conj(V[Psi0])}.
inline double s1(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    return c.gamma * detail::s1_unit(x, b, c);
}

/// Second-order action term, int dz delta sum (|L0[Psi1] - V[Psi0]|^2 - 2 Re{L0[Psi0] conj(V1)}).
inline double s2(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    return c.gamma * c.gamma * detail::s2_unit(x, b, c);
}

inline double alpha01(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    return -(c.l / c.p) * detail::s1_unit(x, b, c) * detail::gamma_per_gamma_tilde(c);
}

inline double alpha02(double a01) { return 0.5 * a01 * a01; }

inline double alpha02(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    return alpha02(alpha01(x, b, c));
}

inline double alpha11(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    const double g = detail::gamma_per_gamma_tilde(c);
    return -(c.l / c.p) * detail::s2_unit(x, b, c) * g * g;
}

enum class Gamma10Path { quadrature, closed_form };

inline double gamma10(const Spectrum& x, const Spectrum& b, const ChannelParams& c,
                      Gamma10Path path = Gamma10Path::quadrature) {
    const double p_ave = derived_params(c).p_ave;
    const double d = c.grid.delta;
    if (path == Gamma10Path::closed_form) {
        double s = 0.0;
        for (int j = 0; j < c.grid.m_total; ++j) s += std::imag(b[j] * std::conj(x[j]));
        return c.grid.w_total / (3.0 * std::numbers::pi * p_ave) * d * s;
    }
    const TrajectoryField p0 = psi0(x, b, c);
    const TrajectoryField l0 = linop_l0(p0, c);
    const auto w = quad::trapezoid_weights(c.n_z, c.l);
    cplx acc{};
    for (int n = 0; n <= c.n_z; ++n) {
        const double z = c.z(n);
        cplx s{};
        for (int j = 0; j < c.grid.m_total; ++j) s += l0(n, j) * std::conj(p0(n, j));
        acc += w[n] * (z * (c.l - z) / c.l) * d * s;
    }
    return 2.0 * c.grid.w_total / (std::numbers::pi * c.l * p_ave) * std::imag(acc);
}

/// Weights w with alpha1 restricted to its B-linear part equal to Re sum_j conj(w_j) B_j.
inline CVec alpha1_linear_weights(const Spectrum& x, const ChannelParams& c) {
    require_same_grid(x.grid, c.grid);
    const MixingTable tab(c);
    const DerivedParams dp = derived_params(c);
    const double d = c.grid.delta, kappa = mixing_kappa(c);
    const cplx i1{0.0, 1.0};
    const double s1_to_alpha1 = -(dp.gamma_tilde / dp.eps) * (c.l / c.p) * detail::gamma_per_gamma_tilde(c);
    const double g10 = dp.gamma_tilde * c.grid.w_total / (3.0 * std::numbers::pi * dp.p_ave) * d;
    CVec w(static_cast<std::size_t>(c.grid.m_total));
    for (int j = 0; j < c.grid.m_total; ++j) {
        cplx nbar{};
        for (int k = tab.begin(j); k < tab.end(j); ++k) {
            const Quartet& q = tab[k];
            const double lam = kappa * q.m;
            const cplx avg = std::abs(lam) < 1e-8 ? cplx{1.0, -0.5 * lam} : (1.0 - std::polar(1.0, -lam)) / (i1 * lam);
            nbar += avg * x[q.j1] * x[q.j2] * std::conj(x[q.j3]);
        }
        nbar *= d * d;
        w[j] = s1_to_alpha1 * (-2.0 * d) * i1 * nbar + g10 * i1 * x[j];
    }
    return w;
}

struct LogDensity {
    double density = 0.0;
    double log_density = 0.0;
};

inline LogDensity make_density(double log_density) { return {std::exp(log_density), log_density}; }

inline LogDensity p0_conditional(const Spectrum& b, const ChannelParams& c) {
    const double d = c.grid.delta, ql = c.q * c.l;
    double s = 0.0;
    for (int j = 0; j < b.size(); ++j) s += std::norm(b[j]);
    return make_density(c.grid.m_total * std::log(d / (std::numbers::pi * ql)) - d / ql * s);
}

inline LogDensity p0_out(const Spectrum& y, const ChannelParams& c) {
    const double d = c.grid.delta, ql = c.q * c.l, pq = c.p + ql;
    const int mi = c.grid.m_inner, mt = c.grid.m_total;
    double s_in = 0.0, s_out = 0.0;
    for (int j = 0; j < y.size(); ++j) (c.grid.is_inner(j) ? s_in : s_out) += std::norm(y[j]);
    return make_density((mt - mi) * std::log(d / (std::numbers::pi * ql)) + mi * std::log(d / (std::numbers::pi * pq)) -
                        d / ql * s_out - d / pq * s_in);
}

struct Beta1Value {
    double value = 0.0;
    double imag_residue = 0.0;  ///< |Im| / scale of the accumulated sum
};

/// Output-side first-order correction, z-integral by Simpson's rule on the n_z lattice.
inline Beta1Value beta1_detailed(const Spectrum& y, const ChannelParams& c) {
    require_same_grid(y.grid, c.grid);
    const FrequencyGrid& g = c.grid;
    const double ql = c.q * c.l, pq = c.p + ql, r = ql / pq, d = g.delta;
    const double kappa = mixing_kappa(c);
    const MixingTable tab(c);
    const auto w = quad::simpson_weights(c.n_z, 1.0);
    auto chi_in = [&](int j) { return g.is_inner(j) ? 1.0 : 0.0; };
    auto coef = [&](int k, double t) { return g.is_inner(k) ? 1.0 + r * (t - 1.0) : t; };
    cplx acc{};
    double scale = 0.0;
    for (const Quartet& q : tab.quartets()) {
        const double bracket = (1.0 - chi_in(q.j)) * chi_in(q.j1) - (1.0 - chi_in(q.j1)) * chi_in(q.j);
        if (bracket == 0.0) continue;
        const cplx yy = y[q.j] * y[q.j3] * std::conj(y[q.j1]) * std::conj(y[q.j2]);
        cplx tint{};
        for (int n = 0; n <= c.n_z; ++n) {
            const double t = static_cast<double>(n) / c.n_z;
            tint += w[n] * std::polar(1.0, kappa * q.m * (t - 1.0)) * coef(q.j2, t) * coef(q.j3, t);
        }
        const cplx term = bracket * yy * tint / cplx{0.0, 2.0};
        acc += term;
        scale = std::max(scale, std::abs(term));
    }
    const double pref = 2.0 * c.gamma * c.p / (ql * pq) * d * d * d;
    Beta1Value out;
    out.value = pref * acc.real();
    out.imag_residue = scale > 0.0 ? std::abs(acc.imag()) / scale : 0.0;
    return out;
}

inline double beta1(const Spectrum& y, const ChannelParams& c) { return beta1_detailed(y, c).value; }

struct PdfExpansionTerms {
    double p0 = 0.0;
    double log_p0 = 0.0;
    double alpha1 = 0.0;
    double alpha2_partial = 0.0;

    double density_first_order() const { return p0 * (1.0 + alpha1); }
    double density() const { return p0 * (1.0 + alpha1 + alpha2_partial); }
};

inline PdfExpansionTerms pdf_expansion(const Spectrum& x, const Spectrum& y, const ChannelParams& c) {
    const Spectrum b = b_from_xy(x, y, c);
    const DerivedParams dp = derived_params(c);
    const LogDensity ld = p0_conditional(b, c);
    PdfExpansionTerms t;
    t.p0 = ld.density;
    t.log_p0 = ld.log_density;
    if (c.gamma == 0.0) return t;
    const double a01 = alpha01(x, b, c);
    const double g10 = gamma10(x, b, c, Gamma10Path::closed_form);
    const double a11 = alpha11(x, b, c);
    const double ge = dp.gamma_tilde / dp.eps;
    t.alpha1 = a01 * ge + g10 * dp.gamma_tilde;
    t.alpha2_partial = alpha02(a01) * ge * ge + (a11 + a01 * g10) * dp.gamma_tilde * ge;
    return t;
}

}  // namespace nlsemi
