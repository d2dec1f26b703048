#pragma once

#include <optional>
#include <vector>

#include "domain.hpp"
#include "mixing.hpp"
#include "quadrature.hpp"

namespace nlsemi {

/// Complex field sampled on the (z x omega) lattice, row n at z_n = n L / n_z.
struct TrajectoryField {
    int n_z = 0;
    int m_total = 0;
    double l = 1.0;
    CVec values;
    /// Set by psi0: the drive B for which L0[field] = e^{i beta w^2 z} B / L exactly.
    std::optional<Spectrum> linear_drive;

    TrajectoryField() = default;
    TrajectoryField(int nz, int m, double length)
        : n_z(nz), m_total(m), l(length), values(static_cast<std::size_t>((nz + 1) * m)) {}

    cplx& operator()(int n, int j) { return values[static_cast<std::size_t>(n * m_total + j)]; }
    const cplx& operator()(int n, int j) const { return values[static_cast<std::size_t>(n * m_total + j)]; }
    double z(int n) const { return n == n_z ? l : n * l / n_z; }

    CVec row(int n) const {
        return CVec(values.begin() + n * m_total, values.begin() + (n + 1) * m_total);
    }
};

inline void require_shape(const TrajectoryField& f, const ChannelParams& c) {
    if (f.n_z != c.n_z || f.m_total != c.grid.m_total) throw GridMismatch("trajectory shape does not match params");
}

inline double dispersion_phase(const ChannelParams& c, int j, double z) {
    const double w = c.grid.omega(j);
    return c.beta * w * w * z;
}

inline TrajectoryField psi0(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    require_same_grid(x.grid, c.grid);
    require_same_grid(b.grid, c.grid);
    TrajectoryField f(c.n_z, c.grid.m_total, c.l);
    for (int n = 0; n <= c.n_z; ++n) {
        const double z = c.z(n);
        const double t = z / c.l;
        for (int j = 0; j < c.grid.m_total; ++j)
            f(n, j) = std::polar(1.0, dispersion_phase(c, j, z)) * (t * b[j] + x[j]);
    }
    for (int j = 0; j < c.grid.m_total; ++j) f(0, j) = x[j];
    f.linear_drive = b;
    return f;
}

/// Green function of d^2/dz^2 with Dirichlet conditions at 0 and L.
inline double green(double z, double z_prime, double l) {
    if (z < 0.0 || z > l || z_prime < 0.0 || z_prime > l) throw InvalidArgument("green: argument outside [0, L]");
    const double step = (z_prime - z >= 0.0) ? 1.0 : 0.0;
    return (z - l) * z_prime / l + (z_prime - z) * step;
}

/// Driving term F of the first-order trajectory correction at position z.
inline Spectrum f_omega(const Spectrum& x, const Spectrum& b, const ChannelParams& c, double z,
                        const MixingTable* table = nullptr) {
    require_same_grid(x.grid, c.grid);
    require_same_grid(b.grid, c.grid);
    const MixingTable local = table ? MixingTable{} : MixingTable(c);
    const MixingTable& tab = table ? *table : local;
    const double t = z / c.l;
    const double kappa = mixing_kappa(c);
    const double d2 = c.grid.delta * c.grid.delta;
    Spectrum out(c.grid);
    CVec a(static_cast<std::size_t>(c.grid.m_total));
    for (int j = 0; j < c.grid.m_total; ++j) a[j] = t * b[j] + x[j];
    for (int j = 0; j < c.grid.m_total; ++j) {
        cplx acc{};
        for (int k = tab.begin(j); k < tab.end(j); ++k) {
            const Quartet& q = tab[k];
            const cplx mu{0.0, kappa * q.m};
            const cplx ph = q.m == 0 ? cplx{1.0} : std::polar(1.0, -kappa * q.m * t);
            acc += ph * a[q.j2] * ((4.0 - mu * t) * b[q.j1] - mu * x[q.j1]) * std::conj(a[q.j3]);
        }
        out[j] = d2 * acc / c.l;
    }
    return out;
}

struct FirstOrder {
    TrajectoryField psi1;     ///< first-order trajectory correction
    TrajectoryField l0_psi1;  ///< L0 applied to psi1 via the z-derivative of the Green integral
};

/// Psi1 and its L0 image. L0[psi1] uses d/dz of the Green integral, i.e.
/// int (z'/L) F dz' - int_z^L F dz', with trapezoid sums on the z lattice.
inline FirstOrder first_order(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    require_same_grid(x.grid, c.grid);
    require_same_grid(b.grid, c.grid);
    const int nz = c.n_z, mt = c.grid.m_total;
    const MixingTable tab(c);
    std::vector<Spectrum> f;
    f.reserve(static_cast<std::size_t>(nz + 1));
    for (int n = 0; n <= nz; ++n) f.push_back(f_omega(x, b, c, c.z(n), &tab));
    const auto w = quad::trapezoid_weights(nz, c.l);

    FirstOrder r{TrajectoryField(nz, mt, c.l), TrajectoryField(nz, mt, c.l)};
    CVec moment(static_cast<std::size_t>(mt));
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j < mt; ++j) moment[j] += w[k] * c.z(k) / c.l * f[k][j];
    CVec tail(static_cast<std::size_t>(mt));  // int_{z_n}^L F
    for (int n = nz; n >= 0; --n) {
        if (n < nz)
            for (int j = 0; j < mt; ++j) tail[j] += 0.5 * c.dz() * (f[n][j] + f[n + 1][j]);
        const double z = c.z(n);
        for (int j = 0; j < mt; ++j) {
            cplx u{};
            if (n > 0 && n < nz)
                for (int k = 0; k <= nz; ++k) u += w[k] * green(z, c.z(k), c.l) * f[k][j];
            const cplx pref = cplx{0.0, c.gamma} * std::polar(1.0, dispersion_phase(c, j, z));
            r.psi1(n, j) = pref * u;
            r.l0_psi1(n, j) = pref * (moment[j] - tail[j]);
        }
    }
    return r;
}

inline TrajectoryField psi1(const Spectrum& x, const Spectrum& b, const ChannelParams& c) {
    if (c.n_z < 8) throw InvalidArgument("psi1 requires n_z >= 8");
    return first_order(x, b, c).psi1;
}

}  // namespace nlsemi
