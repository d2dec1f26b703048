#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "nlsemi/action.hpp"

using namespace nlsemi;
using Catch::Approx;

namespace {

ChannelParams small(int m, int mt, double beta, int nz = 64) {
    ChannelParams c;
    c.grid = FrequencyGrid::make(m, mt, 1.3 * m);
    c.beta = beta;
    c.gamma = 0.4;
    c.q = 0.02;
    c.l = 1.7;
    c.p = 1.2;
    c.n_z = nz;
    return c;
}

// Standalone transcription of the action terms for M' = 2, written without the
// library's mixing tables or trajectory helpers.
struct Oracle {
    double beta, gamma, l, delta;
    std::vector<double> om;
    std::vector<cplx> x, b;

    cplx psi0(int j, double z) const { return std::polar(1.0, beta * om[j] * om[j] * z) * (z / l * b[j] + x[j]); }
    cplx l0psi0(int j, double z) const { return std::polar(1.0, beta * om[j] * om[j] * z) * b[j] / l; }

    template <class F1, class F2, class F3>
    cplx kerr(int j, F1&& f1, F2&& f2, F3&& f3) const {
        cplx acc{};
        const int n = static_cast<int>(om.size());
        for (int j1 = 0; j1 < n; ++j1)
            for (int j2 = 0; j2 < n; ++j2) {
                const int j3 = j1 + j2 - j;
                if (j3 < 0 || j3 >= n) continue;
                acc += f1(j1) * f2(j2) * std::conj(f3(j3));
            }
        return cplx{0.0, gamma} * delta * delta * acc;
    }

    double s1_integrand(double z) const {
        double s = 0.0;
        auto p = [&](int k) { return psi0(k, z); };
        for (int j = 0; j < static_cast<int>(om.size()); ++j)
            s += std::real(l0psi0(j, z) * std::conj(kerr(j, p, p, p)));
        return -2.0 * delta * s;
    }

    double simpson(const std::function<double(double)>& f, int n) const {
        const double h = l / n;
        double s = f(0.0) + f(l);
        for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(k * h);
        return s * h / 3.0;
    }

    // F printed form, psi1 by Simpson over the Green kernel, L0 psi1 by central difference.
    cplx f_drive(int j, double z) const {
        cplx acc{};
        const int n = static_cast<int>(om.size());
        const double t = z / l;
        for (int j1 = 0; j1 < n; ++j1)
            for (int j2 = 0; j2 < n; ++j2) {
                const int j3 = j1 + j2 - j;
                if (j3 < 0 || j3 >= n) continue;
                const cplx mu{0.0, beta * l * (om[j] * om[j] + om[j3] * om[j3] - om[j1] * om[j1] - om[j2] * om[j2])};
                acc += std::exp(-mu * t) / l * (t * b[j2] + x[j2]) * ((4.0 - mu * t) * b[j1] - mu * x[j1]) *
                       std::conj(t * b[j3] + x[j3]);
            }
        return delta * delta * acc;
    }

    cplx psi1(int j, double z, int n) const {
        const double h = l / n;
        cplx s{};
        for (int k = 0; k <= n; ++k) {
            const double zp = k * h;
            const double g = (z - l) * zp / l + (zp >= z ? zp - z : 0.0);
            const double wgt = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            s += wgt * g * f_drive(j, zp);
        }
        return cplx{0.0, gamma} * std::polar(1.0, beta * om[j] * om[j] * z) * s * h / 3.0;
    }
};

Oracle make_oracle(const ChannelParams& c, const Spectrum& x, const Spectrum& b) {
    Oracle o{c.beta, c.gamma, c.l, c.grid.delta, {}, x.values, b.values};
    for (int j = 0; j < c.grid.m_total; ++j) o.om.push_back(c.grid.omega(j));
    return o;
}

}  // namespace

TEST_CASE("linop_l0 on a constant field with beta = 0", "[action]") {
    auto c = small(2, 2, 0.0);
    TrajectoryField f(c.n_z, 2, c.l);
    for (auto& v : f.values) v = cplx{1.5, -0.5};
    for (const auto& v : linop_l0(f, c).values) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("v_of brute force and zero cases", "[action]") {
    auto c = small(2, 2, 0.0);
    TrajectoryField f(c.n_z, 2, c.l);
    CHECK(v_of(f, c, 3)[0] == cplx{});
    for (int n = 0; n <= c.n_z; ++n) {
        f(n, 0) = 1.0;
        f(n, 1) = cplx{0.0, 1.0};
    }
    const Spectrum v = v_of(f, c, 5);
    const double d = c.grid.delta;
    const cplx p[2] = {1.0, cplx{0.0, 1.0}};
    for (int j = 0; j < 2; ++j) {
        cplx acc{};
        for (int j1 = 0; j1 < 2; ++j1)
            for (int j2 = 0; j2 < 2; ++j2) {
                const int j3 = j1 + j2 - j;
                if (j3 >= 0 && j3 < 2) acc += p[j1] * p[j2] * std::conj(p[j3]);
            }
        CHECK(std::abs(v[j] - cplx{0.0, c.gamma} * d * d * acc) < 1e-15);
    }
    auto c0 = c;
    c0.gamma = 0.0;
    CHECK(v_of(f, c0, 5)[1] == cplx{});
}

TEST_CASE("s0 reductions", "[action]") {
    auto c = small(4, 4, 0.5);
    CHECK(s0(Spectrum(c.grid), c) == 0.0);
    ChannelParams d;
    d.grid = FrequencyGrid::make(4, 4, 2.0 * std::numbers::pi);
    d.l = 2.0;
    Spectrum b(d.grid);
    b[0] = 2.0;
    CHECK(s0(b, d) == Approx(0.5));

    const Spectrum x = sample_input(c, 1), bb = sample_b(c, 2);
    CHECK(-s0(bb, c) / c.q == Approx(p0_conditional(bb, c).log_density -
                                     c.grid.m_total * std::log(c.grid.delta / (std::numbers::pi * c.q * c.l)))
                                  .epsilon(1e-12));

    // Direct definition: lattice L0 with finite differences, trapezoid in z.
    auto direct = [&](int nz) {
        auto cc = c;
        cc.n_z = nz;
        const auto f = psi0(x, bb, cc);
        const auto l0 = linop_l0(f, cc, DerivativePath::finite_difference);
        const auto w = quad::trapezoid_weights(nz, cc.l);
        double s = 0.0;
        for (int n = 0; n <= nz; ++n)
            for (int j = 0; j < 4; ++j) s += w[n] * cc.grid.delta * std::norm(l0(n, j));
        return s;
    };
    const double ref = s0(bb, c);
    const double e1 = std::abs(direct(64) - ref), e2 = std::abs(direct(128) - ref);
    CHECK(e1 / ref < 1e-2);
    CHECK(e1 / e2 > 3.0);
}

TEST_CASE("s1 against an independent transcription", "[action]") {
    auto c = small(2, 2, 0.0);
    const Spectrum x = sample_input(c, 11), b = sample_b(c, 12);
    auto c0 = c;
    c0.gamma = 0.0;
    CHECK(s1(x, b, c0) == 0.0);
    CHECK(s1(x, Spectrum(c.grid), c) == 0.0);

    const Oracle o = make_oracle(c, x, b);
    const double ref = o.simpson([&](double z) { return o.s1_integrand(z); }, 2000);
    CHECK(s1(x, b, c) == Approx(ref).epsilon(1e-4));

    auto cb = small(2, 2, 2.5);
    const Oracle ob = make_oracle(cb, x, b);
    CHECK(s1(x, b, cb) == Approx(ob.simpson([&](double z) { return ob.s1_integrand(z); }, 2000)).epsilon(1e-4));

    auto c2 = c;
    c2.gamma = 2.0 * c.gamma;
    CHECK(s1(x, b, c2) == Approx(2.0 * s1(x, b, c)).epsilon(1e-13));
}

TEST_CASE("s2 homogeneity, convergence and independent oracle", "[action]") {
    auto c = small(2, 2, 1.1);
    const Spectrum x = sample_input(c, 21), b = sample_b(c, 22);
    auto c0 = c;
    c0.gamma = 0.0;
    CHECK(s2(x, b, c0) == 0.0);
    auto c2 = c;
    c2.gamma = 2.0 * c.gamma;
    CHECK(s2(x, b, c2) == Approx(4.0 * s2(x, b, c)).epsilon(1e-10));

    auto c128 = c, c256 = c;
    c128.n_z = 128;
    c256.n_z = 256;
    const double a = s2(x, b, c), m = s2(x, b, c128), f = s2(x, b, c256);
    CHECK((a - m) / (m - f) == Approx(4.0).margin(0.6));

    // Dense independent evaluation.
    const Oracle o = make_oracle(c, x, b);
    const int nf = 400;
    const double h = c.l / nf;
    std::vector<std::vector<cplx>> p1(nf + 1, std::vector<cplx>(2));
    for (int k = 0; k <= nf; ++k)
        for (int j = 0; j < 2; ++j) p1[k][j] = o.psi1(j, k * h, 400);
    auto integrand = [&](int k) {
        const double z = k * h;
        double s = 0.0;
        auto p0 = [&](int q) { return o.psi0(q, z); };
        auto q1 = [&](int q) { return p1[k][q]; };
        for (int j = 0; j < 2; ++j) {
            cplx d1;
            if (k == 0) d1 = (-3.0 * p1[0][j] + 4.0 * p1[1][j] - p1[2][j]) / (2.0 * h);
            else if (k == nf) d1 = (3.0 * p1[nf][j] - 4.0 * p1[nf - 1][j] + p1[nf - 2][j]) / (2.0 * h);
            else d1 = (p1[k + 1][j] - p1[k - 1][j]) / (2.0 * h);
            const cplx l0p1 = d1 - cplx{0.0, o.beta * o.om[j] * o.om[j]} * p1[k][j];
            const cplx v = o.kerr(j, p0, p0, p0);
            const cplx v1 = 2.0 * o.kerr(j, q1, p0, p0) + o.kerr(j, p0, p0, q1);
            s += std::norm(l0p1 - v) - 2.0 * std::real(o.l0psi0(j, z) * std::conj(v1));
        }
        return o.delta * s;
    };
    double ref = integrand(0) + integrand(nf);
    for (int k = 1; k < nf; ++k) ref += (k % 2 ? 4.0 : 2.0) * integrand(k);
    ref *= h / 3.0;
    CHECK(s2(x, b, c256) == Approx(ref).epsilon(2e-3));
}

TEST_CASE("alpha coefficients", "[action]") {
    auto c = small(3, 3, 0.8);
    const Spectrum x = sample_input(c, 31), b = sample_b(c, 32);
    const auto d = derived_params(c);
    CHECK(alpha01(x, Spectrum(c.grid), c) == 0.0);
    const double a01 = alpha01(x, b, c);
    CHECK(a01 * d.gamma_tilde / d.eps * c.q + s1(x, b, c) == Approx(0.0).margin(1e-10 * std::abs(s1(x, b, c))));
    CHECK(alpha02(3.0) == 4.5);
    CHECK(alpha02(0.0) == 0.0);
    CHECK(alpha02(x, b, c) == a01 * a01 / 2.0);

    const double a11 = alpha11(x, b, c);
    CHECK(a11 * d.gamma_tilde * d.gamma_tilde ==
          Approx(-(c.grid.w_inner * c.l / (2.0 * std::numbers::pi * d.p_ave)) * s2(x, b, c)).epsilon(1e-12));

    auto c0 = c;
    c0.gamma = 0.0;
    CHECK(alpha01(x, b, c0) == Approx(a01).epsilon(1e-14));
    CHECK(std::isfinite(alpha11(x, b, c0)));
    CHECK(alpha11(x, b, c0) == Approx(a11).epsilon(1e-14));
    auto c2 = c;
    c2.gamma = 3.0 * c.gamma;
    CHECK(alpha01(x, b, c2) == Approx(a01).epsilon(1e-13));
    CHECK(alpha11(x, b, c2) == Approx(a11).epsilon(1e-13));
}

TEST_CASE("alpha01 M'=2 independent value", "[action]") {
    auto c = small(2, 2, 0.0);
    const Spectrum x = sample_input(c, 41), b = sample_b(c, 42);
    const Oracle o = make_oracle(c, x, b);
    const double s1ref = o.simpson([&](double z) { return o.s1_integrand(z); }, 2000);
    const double gt = c.gamma * c.p * c.l * c.grid.w_inner / (2.0 * std::numbers::pi);
    CHECK(alpha01(x, b, c) == Approx(-(c.l / c.p) * s1ref / gt).epsilon(1e-4));
}

TEST_CASE("gamma10 dual paths", "[action]") {
    auto c = small(3, 5, 0.6, 64);
    const Spectrum x = sample_input(c, 51), b = sample_b(c, 52);
    const double closed = gamma10(x, b, c, Gamma10Path::closed_form);
    const double e64 = std::abs(gamma10(x, b, c) - closed);
    auto c2 = c;
    c2.n_z = 128;
    const double e128 = std::abs(gamma10(x, b, c2) - closed);
    CHECK(e64 < 1e-3 * std::abs(closed));
    CHECK(e64 / e128 == Approx(4.0).margin(0.3));

    CHECK(gamma10(Spectrum(c.grid), b, c) == Approx(0.0).margin(1e-14));
    Spectrum br = x;
    for (int j = 0; j < br.size(); ++j) br[j] = (0.5 + j) * x[j];
    CHECK(gamma10(x, br, c, Gamma10Path::closed_form) == Approx(0.0).margin(1e-14));
}

TEST_CASE("p0_conditional", "[action]") {
    auto c = small(2, 4, 0.0);
    const double d = c.grid.delta, ql = c.q * c.l;
    CHECK(p0_conditional(Spectrum(c.grid), c).log_density == Approx(4.0 * std::log(d / (std::numbers::pi * ql))));
    // single-mode normalization over the complex plane in polar coordinates
    const double k = d / ql;
    auto radial = [&](double r) { return 2.0 * std::numbers::pi * r * k / std::numbers::pi * std::exp(-k * r * r); };
    const auto res = quad::adaptive(radial, 0.0, 12.0 / std::sqrt(k), 1e-12);
    CHECK(res.value == Approx(1.0).margin(1e-6));
    const Spectrum b = sample_b(c, 3);
    const double log_lambda = c.grid.m_total * std::log(d / (std::numbers::pi * ql));
    CHECK(p0_conditional(b, c).log_density == Approx(log_lambda - s0(b, c) / c.q).epsilon(1e-12));
}

TEST_CASE("p0_out", "[action]") {
    auto c = small(2, 2, 0.0);
    const double d = c.grid.delta, ql = c.q * c.l, pq = c.p + ql;
    CHECK(p0_out(Spectrum(c.grid), c).log_density == Approx(2.0 * std::log(d / (std::numbers::pi * pq))));
    auto c4 = small(2, 4, 0.0);
    CHECK(p0_out(Spectrum(c4.grid), c4).log_density ==
          Approx(2.0 * std::log(c4.grid.delta / (std::numbers::pi * ql)) + 2.0 * std::log(c4.grid.delta / (std::numbers::pi * pq))));
    // second moment of an inner mode under P0_out is the variance of X + B
    const int n = 100000;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += std::norm(sample_input(c, 8, k)[0] + sample_b(c, 9, k)[0]);
    const double target = pq / d;
    CHECK(std::abs(acc / n - target) < 3.0 * target / std::sqrt(n));
}

TEST_CASE("beta1 vanishes for W' = W and at gamma = 0", "[action]") {
    auto c = small(3, 3, 1.0);
    for (int k = 0; k < 100; ++k) {
        const Spectrum y = sample_b(c, 1234, k);
        CHECK(beta1(y, c) == 0.0);
    }
    auto c5 = small(1, 3, 1.0);
    c5.gamma = 0.0;
    CHECK(beta1(sample_b(c5, 1), c5) == 0.0);
}

TEST_CASE("beta1 brute force at M=2, M'=4, beta=0", "[action]") {
    auto c = small(2, 4, 0.0);
    Spectrum y(c.grid);
    for (int j = 0; j < 4; ++j) y[j] = cplx{0.3 + 0.2 * j, -0.4 + 0.15 * j * j};
    const auto det = beta1_detailed(y, c);
    CHECK(det.imag_residue < 1e-10);
    // beta = 0: the t-integral of c2(t) c3(t) is exact under trapezoid only up to O(dz^2);
    // integrate the quadratic analytically here.
    const double ql = c.q * c.l, pq = c.p + ql, r = ql / pq, d = c.grid.delta;
    auto in = [&](int j) { return j == 1 || j == 2; };
    auto poly = [&](int k) {  // coefficients (a0, a1) of c_k(t) = a0 + a1 t
        return in(k) ? std::pair<double, double>{1.0 - r, r} : std::pair<double, double>{0.0, 1.0};
    };
    cplx acc{};
    for (int j = 0; j < 4; ++j)
        for (int j1 = 0; j1 < 4; ++j1)
            for (int j2 = 0; j2 < 4; ++j2)
                for (int j3 = 0; j3 < 4; ++j3) {
                    if (j1 + j2 != j + j3) continue;
                    const double br = (!in(j) && in(j1) ? 1.0 : 0.0) - (!in(j1) && in(j) ? 1.0 : 0.0);
                    if (br == 0.0) continue;
                    const auto [a0, a1] = poly(j2);
                    const auto [b0, b1] = poly(j3);
                    const double tint = a0 * b0 + (a0 * b1 + a1 * b0) / 2.0 + a1 * b1 / 3.0;
                    acc += br * y[j] * y[j3] * std::conj(y[j1]) * std::conj(y[j2]) * tint / cplx{0.0, 2.0};
                }
    const double ref = 2.0 * c.gamma * c.p / (ql * pq) * d * d * d * acc.real();
    CHECK(std::abs(acc.imag()) < 1e-12 * std::abs(acc));
    CHECK(det.value == Approx(ref).epsilon(1e-3));
    auto c2 = c;
    c2.n_z = 1024;
    CHECK(beta1(y, c2) == Approx(ref).epsilon(1e-6));
}

TEST_CASE("pdf_expansion", "[action]") {
    auto c = small(2, 2, 0.5);
    const Spectrum x = sample_input(c, 61), b = sample_b(c, 62);
    const Spectrum y = y_from_xb(x, b, c);
    auto c0 = c;
    c0.gamma = 0.0;
    const auto t0 = pdf_expansion(x, y, c0);
    CHECK(t0.alpha1 == 0.0);
    CHECK(t0.alpha2_partial == 0.0);
    CHECK(t0.density() == t0.p0);

    const auto t1 = pdf_expansion(x, y, c);
    auto c2 = c;
    c2.gamma = 2.0 * c.gamma;
    const auto t2 = pdf_expansion(x, y, c2);
    CHECK(t2.alpha1 == Approx(2.0 * t1.alpha1).epsilon(1e-12));
    CHECK(t2.alpha2_partial == Approx(4.0 * t1.alpha2_partial).epsilon(1e-12));
    CHECK(t1.p0 == Approx(std::exp(t1.log_p0)));
}
