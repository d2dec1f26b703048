#pragma once

// Split-step Fourier integration of the stochastic NLSE on the W' lattice.
// Time samples are u_n = delta sum_j psi_j exp(-2 pi i j n / N) on N = pad * M'
// points, so the pointwise Kerr rotation reproduces the lattice four-wave sum
// delta^2 sum psi_j1 psi_j2 conj(psi_j3); with pad >= 2 no product wraps back
// into the band within a step.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <vector>

#include "action.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace nlsemi {

enum class SplitScheme { strang, lie };

struct SimConfig {
    int n_steps = 256;
    SplitScheme scheme = SplitScheme::strang;
    int pad_factor = 2;
    std::uint64_t seed = 1;

    /// Transform length is capped at 2^22 points and n_steps * pad_factor at 2^28.
    static constexpr long max_transform = 1L << 22;
    static constexpr long max_work = 1L << 28;

    void validate(const ChannelParams& c) const {
        if (n_steps < 16) throw InvalidArgument("n_steps must be >= 16");
        if (pad_factor < 1) throw InvalidArgument("pad_factor must be >= 1");
        if (static_cast<long>(pad_factor) * c.grid.m_total > max_transform)
            throw SizeGuard("transform length exceeds the simulation memory guard");
        if (static_cast<long>(n_steps) * pad_factor > max_work) throw SizeGuard("n_steps * pad_factor exceeds the simulation guard");
    }
};

namespace detail {

// Plan creation in FFTW is not thread-safe; execution on distinct arrays is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

class SplitStepper {
public:
    SplitStepper(const ChannelParams& c, const SimConfig& cfg)
        : c_(c), cfg_(cfg), mt_(c.grid.m_total), n_(cfg.pad_factor * c.grid.m_total) {
        cfg.validate(c);
        if (c.q < 0.0) throw InvalidArgument("noise level must be non-negative");
        ChannelParams check = c;
        if (check.q == 0.0) check.q = 1.0;  // a noiseless channel is valid here
        check.validate();
        buf_ = fftw_alloc_complex(static_cast<std::size_t>(n_));
        {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            fwd_ = fftw_plan_dft_1d(n_, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_1d(n_, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
        }
        dz_ = c.l / cfg.n_steps;
        const int below = (n_ - mt_) / 2;
        freq_.resize(static_cast<std::size_t>(n_));
        for (int k = 0; k < n_; ++k) {
            const int idx = k < n_ - below ? k : k - n_;
            freq_[k] = -0.5 * c.grid.w_total + (idx + 0.5) * c.grid.dw;
        }
        half_.resize(static_cast<std::size_t>(n_));
        full_.resize(static_cast<std::size_t>(n_));
        for (int k = 0; k < n_; ++k) {
            const double ph = c.beta * freq_[k] * freq_[k] * dz_;
            half_[k] = std::polar(1.0, 0.5 * ph);
            full_[k] = std::polar(1.0, ph);
        }
        spec_.assign(static_cast<std::size_t>(n_), cplx{});
    }
    ~SplitStepper() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    SplitStepper(const SplitStepper&) = delete;
    SplitStepper& operator=(const SplitStepper&) = delete;

    /// One realisation; run selects the noise stream, noise = false propagates deterministically.
    Spectrum propagate(const Spectrum& x, std::uint64_t run, bool noise) {
        require_same_grid(x.grid, c_.grid);
        std::fill(spec_.begin(), spec_.end(), cplx{});
        for (int j = 0; j < mt_; ++j) spec_[j] = x[j];
        const double noise_sigma = std::sqrt(c_.q * dz_ / c_.grid.delta);
        const bool add_noise = noise && c_.q > 0.0;
        const std::uint64_t stream = stream_id(StreamTag::sim_noise, run);
        for (int s = 0; s < cfg_.n_steps; ++s) {
            if (cfg_.scheme == SplitScheme::strang) {
                linear(half_);
                nonlinear();
                linear(half_);
            } else {
                nonlinear();
                linear(full_);
            }
            if (add_noise)
                for (int j = 0; j < mt_; ++j)
                    spec_[j] += noise_sigma * Philox::complex_normal(cfg_.seed, stream,
                                                                     static_cast<std::uint64_t>(s) * mt_ + j);
        }
        Spectrum y(c_.grid);
        for (int j = 0; j < mt_; ++j) y[j] = spec_[j];
        return y;
    }

    /// Kerr rotation of one time-domain sample, exposed for conservation checks.
    static cplx kerr_rotate(cplx u, double gamma, double dz) { return u * std::polar(1.0, gamma * std::norm(u) * dz); }

private:
    void linear(const std::vector<cplx>& ph) {
        for (int k = 0; k < n_; ++k) spec_[k] *= ph[k];
    }
    void nonlinear() {
        if (c_.gamma == 0.0) return;
        const double d = c_.grid.delta;
        for (int k = 0; k < n_; ++k) {
            buf_[k][0] = d * spec_[k].real();
            buf_[k][1] = d * spec_[k].imag();
        }
        fftw_execute(fwd_);
        for (int k = 0; k < n_; ++k) {
            const cplx u = kerr_rotate({buf_[k][0], buf_[k][1]}, c_.gamma, dz_);
            buf_[k][0] = u.real();
            buf_[k][1] = u.imag();
        }
        fftw_execute(bwd_);
        const double scale = 1.0 / (n_ * d);
        for (int k = 0; k < n_; ++k) spec_[k] = scale * cplx{buf_[k][0], buf_[k][1]};
    }

    ChannelParams c_;
    SimConfig cfg_;
    int mt_, n_;
    double dz_ = 0.0;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_{}, bwd_{};
    std::vector<double> freq_;
    std::vector<cplx> half_, full_, spec_;
};

}  // namespace detail

/// One noisy realisation of the channel; `run` selects an independent noise path.
inline Spectrum split_step(const Spectrum& x, const ChannelParams& c, const SimConfig& cfg, std::uint64_t run = 0) {
    detail::SplitStepper st(c, cfg);
    return st.propagate(x, run, true);
}

inline Spectrum noiseless_propagate(const Spectrum& x, const ChannelParams& c, const SimConfig& cfg) {
    detail::SplitStepper st(c, cfg);
    return st.propagate(x, 0, false);
}

/// Many realisations with the same input, one stepper for all runs.
inline std::vector<Spectrum> simulate_runs(const Spectrum& x, const ChannelParams& c, const SimConfig& cfg, long runs) {
    detail::SplitStepper st(c, cfg);
    std::vector<Spectrum> out;
    out.reserve(static_cast<std::size_t>(runs));
    for (long r = 0; r < runs; ++r) out.push_back(st.propagate(x, static_cast<std::uint64_t>(r), true));
    return out;
}

struct ActionResidual {
    double residual = 0.0;
    double gamma = 0.0;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
};

/// Truncated action S0 + S1 + S2 at the noiseless output image of x.
inline ActionResidual action_residual(const Spectrum& x, const ChannelParams& c, const SimConfig& cfg) {
    const Spectrum y = noiseless_propagate(x, c, cfg);
    const Spectrum b = b_from_xy(x, y, c);
    ActionResidual r;
    r.gamma = c.gamma;
    r.s0 = s0(b, c);
    if (c.gamma != 0.0) {
        r.s1 = s1(x, b, c);
        r.s2 = s2(x, b, c);
    }
    r.residual = r.s0 + r.s1 + r.s2;
    return r;
}

/// Per-mode moments of the normalised noise |B_j|^2 delta/(QL) over independent runs.
struct NoiseModeStats {
    double power = 0.0, power_se = 0.0;          ///< E|b|^2, 1 for the exact channel
    double kurtosis = 0.0, kurtosis_se = 0.0;    ///< E|b|^4 / (E|b|^2)^2, 2 for a circular Gaussian
};

struct NoiseStatistics {
    std::vector<NoiseModeStats> modes;
    long runs = 0;
    /// Largest deviation from the Gaussian values in units of the standard error.
    double max_power_sigma = 0.0, max_kurtosis_sigma = 0.0;
};

/// Streams `runs` noisy realisations and compares the noise field to the linear-channel law.
inline NoiseStatistics noise_statistics(const Spectrum& x, const ChannelParams& c, const SimConfig& cfg, long runs) {
    if (runs < 2) throw InvalidArgument("noise_statistics needs at least two runs");
    detail::SplitStepper st(c, cfg);
    const int mt = c.grid.m_total;
    const double unit = c.q * c.l / c.grid.delta;
    std::vector<std::vector<double>> powers(static_cast<std::size_t>(mt), std::vector<double>(static_cast<std::size_t>(runs)));
    for (long r = 0; r < runs; ++r) {
        const Spectrum b = b_from_xy(x, st.propagate(x, static_cast<std::uint64_t>(r), true), c);
        for (int j = 0; j < mt; ++j) powers[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)] = std::norm(b[j]) / unit;
    }
    NoiseStatistics out;
    out.runs = runs;
    const double n = static_cast<double>(runs);
    for (const auto& p : powers) {
        double m2 = 0.0, m4 = 0.0;
        for (double v : p) {
            m2 += v;
            m4 += v * v;
        }
        m2 /= n;
        m4 /= n;
        NoiseModeStats s;
        s.power = m2;
        s.kurtosis = m4 / (m2 * m2);
        // delta-method influence functions of the two estimators
        double v2 = 0.0, vk = 0.0;
        for (double v : p) {
            v2 += (v - m2) * (v - m2);
            const double ik = ((v * v - m4) - 2.0 * s.kurtosis * m2 * (v - m2)) / (m2 * m2);
            vk += ik * ik;
        }
        s.power_se = std::sqrt(v2 / (n - 1.0) / n);
        s.kurtosis_se = std::sqrt(vk / (n - 1.0) / n);
        out.max_power_sigma = std::max(out.max_power_sigma, std::abs(s.power - 1.0) / s.power_se);
        out.max_kurtosis_sigma = std::max(out.max_kurtosis_sigma, std::abs(s.kurtosis - 2.0) / s.kurtosis_se);
        out.modes.push_back(s);
    }
    return out;
}

/// Channel input with every inner mode at the average power, X_j = sqrt(P/delta).
inline Spectrum flat_input(const ChannelParams& c) {
    Spectrum x(c.grid);
    for (int j = c.grid.inner_begin(); j < c.grid.inner_end(); ++j) x[j] = std::sqrt(c.p / c.grid.delta);
    return x;
}

struct PdfCheckReport {
    double l1_first_order = 0.0;  ///< |KDE - P0 (1 + alpha1)|_1
    double l1_leading = 0.0;      ///< |KDE - P0|_1
    double sup_first_order = 0.0;
    double sup_leading = 0.0;
    double budget = 0.0;          ///< second-order term plus KDE error
    double second_order_l1 = 0.0; ///< |P0 alpha2|_1, the first neglected order
    double kde_bias_l1 = 0.0;
    double kde_noise_l1 = 0.0;
    double bandwidth = 0.0;
    double gamma_tilde = 0.0, eps = 0.0;
    long runs = 0;
    bool improves = false;
    bool within_budget = false;
    bool passed() const { return improves && within_budget; }
};

namespace detail {

/// Isotropic two-dimensional Gaussian density with per-coordinate variance s2.
inline double gauss2(double dx, double dy, double s2) {
    return std::exp(-(dx * dx + dy * dy) / (2.0 * s2)) / (2.0 * std::numbers::pi * s2);
}

}  // namespace detail

/// Compares a kernel-density estimate of Y (single mode) against the expansion.
/// The density lives on the complex plane of the output; the comparison grid
/// spans +-6 noise standard deviations around the noiseless image.
inline PdfCheckReport empirical_pdf_check(const ChannelParams& c, const SimConfig& cfg, long n_runs, int grid_points = 81) {
    if (c.grid.m_total != 1) throw InvalidArgument("empirical_pdf_check supports a single mode (M' = 1)");
    if (n_runs < 100000) throw InvalidArgument("empirical_pdf_check needs at least 1e5 runs");
    const Spectrum x = flat_input(c);
    const auto samples = simulate_runs(x, c, cfg, n_runs);
    const DerivedParams dp = derived_params(c);
    const double s2 = 0.5 * c.q * c.l / c.grid.delta;  // variance per real coordinate
    const double s = std::sqrt(s2);

    PdfCheckReport r;
    r.runs = n_runs;
    r.gamma_tilde = dp.gamma_tilde;
    r.eps = dp.eps;
    // Silverman's rule for a two-dimensional Gaussian product kernel
    double mx = 0, my = 0, vx = 0, vy = 0;
    for (const auto& y : samples) {
        mx += y[0].real();
        my += y[0].imag();
    }
    mx /= n_runs;
    my /= n_runs;
    for (const auto& y : samples) {
        vx += (y[0].real() - mx) * (y[0].real() - mx);
        vy += (y[0].imag() - my) * (y[0].imag() - my);
    }
    const double sd = std::sqrt(0.5 * (vx + vy) / (n_runs - 1));
    const double h = sd * std::pow(static_cast<double>(n_runs), -1.0 / 6.0);
    r.bandwidth = h;

    const cplx centre = noiseless_propagate(x, c, cfg)[0];
    const double half = 6.0 * s, step = 2.0 * half / (grid_points - 1), area = step * step;
    // bin the samples on a fine grid first; the kernel sum then runs over occupied bins
    const int fine = 4 * grid_points;
    const double fstep = 2.0 * (half + 6.0 * h) / fine, f0x = centre.real() - half - 6.0 * h, f0y = centre.imag() - half - 6.0 * h;
    std::vector<double> hist(static_cast<std::size_t>(fine * fine), 0.0);
    for (const auto& y : samples) {
        const int ix = static_cast<int>(std::floor((y[0].real() - f0x) / fstep));
        const int iy = static_cast<int>(std::floor((y[0].imag() - f0y) / fstep));
        if (ix >= 0 && iy >= 0 && ix < fine && iy < fine) hist[static_cast<std::size_t>(iy * fine + ix)] += 1.0;
    }
    const double ql_s2 = s2;
    for (int gy = 0; gy < grid_points; ++gy)
        for (int gx = 0; gx < grid_points; ++gx) {
            const double px = centre.real() - half + gx * step, py = centre.imag() - half + gy * step;
            double kde = 0.0;
            const int cx = static_cast<int>((px - f0x) / fstep), cy = static_cast<int>((py - f0y) / fstep);
            const int reach = static_cast<int>(std::ceil(6.0 * h / fstep)) + 1;
            for (int iy = std::max(0, cy - reach); iy <= std::min(fine - 1, cy + reach); ++iy)
                for (int ix = std::max(0, cx - reach); ix <= std::min(fine - 1, cx + reach); ++ix) {
                    const double cnt = hist[static_cast<std::size_t>(iy * fine + ix)];
                    if (cnt == 0.0) continue;
                    kde += cnt * detail::gauss2(px - (f0x + (ix + 0.5) * fstep), py - (f0y + (iy + 0.5) * fstep), h * h);
                }
            kde /= n_runs;

            Spectrum y(c.grid);
            y[0] = {px, py};
            const PdfExpansionTerms t = pdf_expansion(x, y, c);
            const double first = t.p0 * (1.0 + t.alpha1);
            r.l1_first_order += std::abs(kde - first) * area;
            r.l1_leading += std::abs(kde - t.p0) * area;
            r.sup_first_order = std::max(r.sup_first_order, std::abs(kde - first));
            r.sup_leading = std::max(r.sup_leading, std::abs(kde - t.p0));
            r.second_order_l1 += std::abs(t.p0 * t.alpha2_partial) * area;

            // KDE error model: smoothing bias of a Gaussian of the same width, and the pointwise
            // standard deviation sqrt(p / (4 pi n h^2)) of the kernel estimate
            const double dx = px - centre.real(), dy = py - centre.imag();
            r.kde_bias_l1 += std::abs(detail::gauss2(dx, dy, ql_s2 + h * h) - detail::gauss2(dx, dy, ql_s2)) * area;
            r.kde_noise_l1 += std::sqrt(std::max(first, 0.0) / (4.0 * std::numbers::pi * n_runs * h * h)) * area;
        }
    r.budget = r.second_order_l1 + r.kde_bias_l1 + r.kde_noise_l1;
    r.improves = r.l1_first_order < r.l1_leading;
    r.within_budget = r.l1_first_order <= r.budget;
    return r;
}

}  // namespace nlsemi
