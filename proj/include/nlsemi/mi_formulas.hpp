#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "domain.hpp"
#include "quadrature.hpp"

namespace nlsemi {

inline double shannon_mi(double eps, int m) {
    if (!(eps > 0.0)) throw InvalidArgument("shannon_mi: eps must be positive");
    if (m < 1) throw InvalidArgument("shannon_mi: m must be >= 1");
    return m * std::log1p(1.0 / eps);
}

/// sin^2(x)/x^2 with the Taylor form below |x| < 1e-4.
inline double sinc2(double x) {
    if (std::abs(x) < 1e-4) return 1.0 - x * x / 3.0;
    const double s = std::sin(x) / x;
    return s * s;
}

enum class GForm {
    smooth,   ///< 1 + 1/2 int sinc^2(b (y-y1)(y-y2))
    printed,  ///< 1 + 1/(2 b^2) int sin^2(b u v) / (u^2 v^2), evaluated literally
};

namespace detail {

/// Nested adaptive Gauss-Kronrod over y, y1 and an inner y2-range supplied by `range`.
inline double cube_integral(const std::function<double(double, double, double)>& f, double tol,
                            const std::function<std::pair<double, double>(double, double)>& range) {
    auto inner = [&](double y, double y1) {
        const auto [lo, hi] = range(y, y1);
        if (!(hi > lo)) return 0.0;
        return quad::adaptive([&](double y2) { return f(y, y1, y2); }, lo, hi, 0.05 * tol, 0.0, 400).value;
    };
    auto middle = [&](double y) {
        return quad::adaptive([&](double y1) { return inner(y, y1); }, -0.5, 0.5, 0.2 * tol, 0.0, 400).value;
    };
    return quad::adaptive(middle, -0.5, 0.5, 0.5 * tol, 0.0, 400).value;
}

inline std::pair<double, double> full_range(double, double) { return {-0.5, 0.5}; }

}  // namespace detail

/// G(beta_tilde), the dimensionless coefficient of the singular gamma^2/eps terms.
inline double g_function(double beta_tilde, double tol = 1e-6, GForm form = GForm::smooth) {
    if (!(tol >= 1e-10 && tol <= 1e-3)) throw InvalidArgument("g_function: tol must lie in [1e-10, 1e-3]");
    const double b = std::abs(beta_tilde);
    if (b == 0.0) return 1.5;
    std::function<double(double, double, double)> f;
    if (form == GForm::smooth) {
        f = [b](double y, double y1, double y2) { return sinc2(b * (y - y1) * (y - y2)); };
    } else {
        f = [b](double y, double y1, double y2) {
            const double u = y - y1, v = y - y2;
            const double den = b * b * u * u * v * v;
            if (den == 0.0) return 1.0;
            const double s = std::sin(b * u * v);
            return s * s / den;
        };
    }
    return 1.0 + 0.5 * detail::cube_integral(f, 2.0 * tol, detail::full_range);
}

/// Continuum limit of the band-truncated lattice sum: the cube restricted to |y1 + y2 - y| <= 1/2.
inline double g_function_banded(double beta_tilde, double tol = 1e-6) {
    const double b = std::abs(beta_tilde);
    auto f = [b](double y, double y1, double y2) { return sinc2(b * (y - y1) * (y - y2)); };
    auto range = [](double y, double y1) {
        return std::pair<double, double>{std::max(-0.5, y - y1 - 0.5), std::min(0.5, y - y1 + 0.5)};
    };
    return 1.0 + 0.5 * detail::cube_integral(f, 2.0 * tol, range);
}

/// Midpoint-lattice analogue of G over all m^3 triples.
inline double g_function_discrete(double beta_tilde, int m) {
    if (m < 1) throw InvalidArgument("g_function_discrete: m must be >= 1");
    double s = 0.0;
    for (int j = 0; j < m; ++j)
        for (int j1 = 0; j1 < m; ++j1)
            for (int j2 = 0; j2 < m; ++j2)
                s += (j == j1 || j == j2) ? 1.0 : sinc2(beta_tilde * (j - j1) * (j - j2) / double(m * m));
    return 1.0 + s / (2.0 * m * m * m);
}

/// Lattice analogue restricted to triples whose fourth index j1 + j2 - j stays inside the band.
inline double g_function_discrete_truncated(double beta_tilde, int m) {
    if (m < 1) throw InvalidArgument("g_function_discrete_truncated: m must be >= 1");
    double s = 0.0;
    for (int j = 0; j < m; ++j)
        for (int j1 = 0; j1 < m; ++j1)
            for (int j2 = 0; j2 < m; ++j2) {
                const int j3 = j1 + j2 - j;
                if (j3 < 0 || j3 >= m) continue;
                s += (j == j1 || j == j2) ? 1.0 : sinc2(beta_tilde * (j - j1) * (j - j2) / double(m * m));
            }
    return 1.0 + s / (2.0 * m * m * m);
}

inline double i1_singular(const ChannelParams& c, double tol = 1e-6) {
    const DerivedParams d = derived_params(c);
    if (d.gamma_tilde == 0.0) return 0.0;
    return 4.0 * c.grid.m_inner * g_function(d.beta_tilde, tol) * d.gamma_tilde * d.gamma_tilde / d.eps;
}

inline double i2_singular(const ChannelParams& c, double tol = 1e-6) { return -i1_singular(c, tol); }

/// (1/2) int_0^inf e^{-tau} log(1 + tau^2 g^2 / 3) dtau, the per-mode loss at zero dispersion.
inline double zero_dispersion_loss(double gamma_tilde, double tol = 1e-8) {
    if (gamma_tilde == 0.0) return 0.0;
    const double k = gamma_tilde * gamma_tilde / 3.0;
    auto f = [k](double tau) { return std::exp(-tau) * std::log1p(k * tau * tau); };
    const double upper = 60.0;
    const auto r = quad::adaptive(f, 0.0, upper, 0.1 * tol, 1e-14, 4000);
    // tail beyond `upper`: e^{-T} log(1 + k T^2) (1 + O(1/T)) is far below tolerance
    return 0.5 * r.value;
}

inline double zero_dispersion_loss_laguerre(double gamma_tilde, int nodes = 64) {
    const auto rule = quad::gauss_laguerre(nodes);
    const double k = gamma_tilde * gamma_tilde / 3.0;
    double s = 0.0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) s += rule.w[i] * std::log1p(k * rule.x[i] * rule.x[i]);
    return 0.5 * s;
}

/// Exact-in-nonlinearity MI at zero dispersion, natural log.
inline double mi_zero_dispersion(double eps, double gamma_tilde, int m, double tol = 1e-8) {
    if (!(eps > 0.0)) throw InvalidArgument("mi_zero_dispersion: eps must be positive");
    if (gamma_tilde < 0.0) throw InvalidArgument("mi_zero_dispersion: gamma_tilde must be >= 0");
    return shannon_mi(eps, m) - m * zero_dispersion_loss(gamma_tilde, tol);
}

struct ErrorBudget {
    double order_gamma2 = 0.0;  ///< magnitude gamma_tilde^2
    double order_eps = 0.0;     ///< magnitude eps
};

struct MiResult {
    double value_per_mode = 0.0;
    double shannon = 0.0;
    std::vector<std::pair<std::string, double>> correction_terms;
    ErrorBudget error_budget;
    DerivedParams params;
    bool outside_validity = false;
};

/// Shannon logarithm with the declared O(gamma_tilde^2) and O(eps) budget.
inline MiResult mi_perturbative(const ChannelParams& c) {
    MiResult r;
    r.params = derived_params(c);
    r.shannon = std::log1p(1.0 / r.params.eps);
    r.value_per_mode = r.shannon;
    for (const auto& t : r.correction_terms) r.value_per_mode += t.second;
    r.error_budget.order_gamma2 = r.params.gamma_tilde * r.params.gamma_tilde;
    r.error_budget.order_eps = r.params.eps;
    r.outside_validity = r.params.eps >= 0.5 || std::abs(r.params.gamma_tilde) >= 0.5;
    return r;
}

}  // namespace nlsemi
