#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace nlsemi {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

/// Uniform frequency lattice with a centred inner band of m_inner modes.
struct FrequencyGrid {
    int m_inner = 1;
    int m_total = 1;
    double w_inner = 1.0;
    double w_total = 1.0;
    double dw = 1.0;
    double delta = 1.0 / (2.0 * std::numbers::pi);

    static FrequencyGrid make(int m_inner, int m_total, double w_inner) {
        if (m_inner < 1) throw InvalidGrid("m_inner must be >= 1");
        if (m_total < m_inner) throw InvalidGrid("m_total must be >= m_inner");
        if ((m_total - m_inner) % 2 != 0) throw InvalidGrid("m_total - m_inner must be even");
        if (!(w_inner > 0.0) || !std::isfinite(w_inner)) throw InvalidGrid("w_inner must be positive");
        FrequencyGrid g;
        g.m_inner = m_inner;
        g.m_total = m_total;
        g.w_inner = w_inner;
        g.dw = w_inner / m_inner;
        g.w_total = w_inner * m_total / m_inner;
        g.delta = w_inner / (2.0 * std::numbers::pi * m_inner);
        return g;
    }

    double omega(int j) const { return -0.5 * w_total + (j + 0.5) * dw; }
    int inner_begin() const { return (m_total - m_inner) / 2; }
    int inner_end() const { return inner_begin() + m_inner; }
    bool is_inner(int j) const { return j >= inner_begin() && j < inner_end(); }
    /// Period of the dual time lattice.
    double time_window() const { return 1.0 / delta; }

    bool operator==(const FrequencyGrid&) const = default;
};

/// How four-wave index sums treat j3 = j1 + j2 - j outside the lattice.
enum class Closure { truncate, periodic };

inline std::string to_string(Closure c) { return c == Closure::truncate ? "truncate" : "periodic"; }

struct ChannelParams {
    double beta = 0.0;
    double gamma = 0.0;
    double q = 0.01;
    double l = 1.0;
    double p = 1.0;
    FrequencyGrid grid{};
    int n_z = 64;
    Closure closure = Closure::truncate;

    void validate() const {
        if (!(q > 0.0) || !(l > 0.0) || !(p > 0.0))
            throw InvalidArgument("q, l and p must be positive");
        if (!std::isfinite(beta) || !std::isfinite(gamma))
            throw InvalidArgument("beta and gamma must be finite");
        if (n_z < 2) throw InvalidArgument("n_z must be >= 2");
    }

    double dz() const { return l / n_z; }
    double z(int n) const { return n == n_z ? l : n * dz(); }
    int m_total() const { return grid.m_total; }
};

struct DerivedParams {
    double eps = 0.0;
    double gamma_tilde = 0.0;
    double beta_tilde = 0.0;
    double p_ave = 0.0;
    double p_noise = 0.0;
};

inline DerivedParams derived_params(const ChannelParams& c) {
    const double w = c.grid.w_inner;
    DerivedParams d;
    d.eps = c.q * c.l / c.p;
    d.gamma_tilde = c.gamma * c.p * c.l * w / (2.0 * std::numbers::pi);
    d.beta_tilde = c.beta * c.l * w * w;
    d.p_ave = c.p * w / (2.0 * std::numbers::pi);
    d.p_noise = c.q * c.l * w / (2.0 * std::numbers::pi);
    return d;
}

/// Build parameters from the dimensionless triple (eps, gamma_tilde, beta_tilde)
/// with P = L = 1.
inline ChannelParams params_from_dimensionless(double eps, double gamma_tilde, double beta_tilde,
                                               const FrequencyGrid& grid, int n_z = 64,
                                               Closure closure = Closure::truncate) {
    ChannelParams c;
    c.grid = grid;
    c.p = 1.0;
    c.l = 1.0;
    c.q = eps;
    c.gamma = gamma_tilde * 2.0 * std::numbers::pi / grid.w_inner;
    c.beta = beta_tilde / (grid.w_inner * grid.w_inner);
    c.n_z = n_z;
    c.closure = closure;
    return c;
}

struct Spectrum {
    CVec values;
    FrequencyGrid grid;

    Spectrum() = default;
    explicit Spectrum(const FrequencyGrid& g) : values(static_cast<std::size_t>(g.m_total)), grid(g) {}
    Spectrum(const FrequencyGrid& g, CVec v) : values(std::move(v)), grid(g) {
        if (static_cast<int>(values.size()) != g.m_total) throw GridMismatch("spectrum length != m_total");
    }

    int size() const { return static_cast<int>(values.size()); }
    cplx& operator[](int j) { return values[static_cast<std::size_t>(j)]; }
    const cplx& operator[](int j) const { return values[static_cast<std::size_t>(j)]; }
};

inline void require_same_grid(const FrequencyGrid& a, const FrequencyGrid& b) {
    if (!(a == b)) throw GridMismatch("spectra live on different grids");
}

/// Input field with E|X_j|^2 = P/delta on the inner band, zero outside.
/// `draw` selects an independent realisation for the same seed.
inline Spectrum sample_input(const ChannelParams& c, std::uint64_t seed, std::uint64_t draw = 0) {
    Spectrum x(c.grid);
    const double sigma = std::sqrt(c.p / c.grid.delta);
    for (int j = c.grid.inner_begin(); j < c.grid.inner_end(); ++j)
        x[j] = sigma * Philox::complex_normal(seed, stream_id(StreamTag::input, j), draw);
    return x;
}

/// Dispersion-compensated noise image with E|B_j|^2 = QL/delta on every mode.
inline Spectrum sample_b(const ChannelParams& c, std::uint64_t seed, std::uint64_t draw = 0) {
    Spectrum b(c.grid);
    const double sigma = std::sqrt(c.q * c.l / c.grid.delta);
    for (int j = 0; j < c.grid.m_total; ++j)
        b[j] = sigma * Philox::complex_normal(seed, stream_id(StreamTag::noise, j), draw);
    return b;
}

inline Spectrum b_from_xy(const Spectrum& x, const Spectrum& y, const ChannelParams& c) {
    require_same_grid(x.grid, y.grid);
    require_same_grid(x.grid, c.grid);
    Spectrum b(c.grid);
    for (int j = 0; j < b.size(); ++j) {
        const double w = c.grid.omega(j);
        b[j] = std::polar(1.0, -c.beta * w * w * c.l) * y[j] - x[j];
    }
    return b;
}

/// Inverse of b_from_xy: Y = exp(i beta omega^2 L) (X + B).
inline Spectrum y_from_xb(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    require_same_grid(x.grid, b.grid);
    Spectrum y(c.grid);
    for (int j = 0; j < y.size(); ++j) {
        const double w = c.grid.omega(j);
        y[j] = std::polar(1.0, c.beta * w * w * c.l) * (x[j] + b[j]);
    }
    return y;
}

enum class Band { inner, outer, all };

inline double band_energy(const Spectrum& s, Band band) {
    double acc = 0.0;
    for (int j = 0; j < s.size(); ++j) {
        const bool in = s.grid.is_inner(j);
        if (band == Band::all || (band == Band::inner && in) || (band == Band::outer && !in))
            acc += std::norm(s[j]);
    }
    return s.grid.delta * acc;
}

}  // namespace nlsemi
