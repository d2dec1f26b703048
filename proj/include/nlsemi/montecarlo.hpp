#pragma once

// Monte-Carlo averages over P[X] P0[Y|X]. Sample i of a run with seed s is built
// from counter-based streams keyed by (s, i), so every estimate is a pure
// function of (params, n, seed) whatever the thread count.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "action.hpp"
#include "errors.hpp"

namespace nlsemi {

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;  ///< batch-means standard error
    long n = 0;              ///< samples drawn
    std::uint64_t seed = 0;
    long flagged = 0;        ///< non-finite samples excluded from the mean
};

struct MCOptions {
    int batches = 64;
    int threads = 1;
    bool antithetic = true;       ///< MI integrands averaged over the draws (X, B) and (X, -B)
    bool control_variate = true;  ///< zero-mean control variate on the I2 integrand
};

/// Fields of one Monte-Carlo draw; y is the lab-frame output.
struct Sample {
    std::uint64_t index = 0;
    Spectrum x, b, y;
};

inline Sample draw_sample(const ChannelParams& c, std::uint64_t seed, std::uint64_t index) {
    Sample s;
    s.index = index;
    s.x = sample_input(c, seed, index);
    s.b = sample_b(c, seed, index);
    s.y = y_from_xb(s.x, s.b, c);
    return s;
}

/// Batch means of K functionals evaluated on the same draws.
struct BatchTable {
    int components = 0;
    std::vector<std::vector<double>> means;  ///< [component][batch]
    std::vector<long> counts;                ///< [component] finite samples
    long n = 0;
    std::uint64_t seed = 0;

    int batches() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }

    /// Batch-means estimate of sum_k w_k * component_k.
    MCEstimate combine(const std::vector<double>& w) const {
        const int nb = batches();
        std::vector<double> v(static_cast<std::size_t>(nb), 0.0);
        for (int k = 0; k < components; ++k)
            if (w[k] != 0.0)
                for (int b = 0; b < nb; ++b) v[b] += w[k] * means[k][b];
        MCEstimate e;
        e.n = n;
        e.seed = seed;
        for (int k = 0; k < components; ++k)
            if (w[k] != 0.0) e.flagged = std::max(e.flagged, n - counts[k]);
        for (double x : v) e.mean += x;
        e.mean /= nb;
        double ss = 0.0;
        for (double x : v) ss += (x - e.mean) * (x - e.mean);
        e.std_error = nb > 1 ? std::sqrt(ss / (nb - 1) / nb) : 0.0;
        return e;
    }
    MCEstimate component(int k) const {
        std::vector<double> w(static_cast<std::size_t>(components), 0.0);
        w[k] = 1.0;
        return combine(w);
    }
};

using VectorFunctional = std::function<void(const Sample&, double* out)>;

/// Runs a K-component functional over n draws split into equal contiguous batches.
inline BatchTable estimate_batches(const VectorFunctional& f, int components, const ChannelParams& c, long n,
                                   std::uint64_t seed, const MCOptions& opt = {}) {
    if (n < 1024) throw InvalidArgument("Monte-Carlo estimates need n >= 1024");
    if (opt.batches < 32) throw InvalidArgument("Monte-Carlo estimates need at least 32 batches");
    if (components < 1) throw InvalidArgument("functional must have at least one component");
    c.validate();
    const int nb = opt.batches;
    BatchTable t;
    t.components = components;
    t.n = n;
    t.seed = seed;
    t.means.assign(static_cast<std::size_t>(components), std::vector<double>(static_cast<std::size_t>(nb), 0.0));
    std::vector<std::vector<long>> good(static_cast<std::size_t>(components), std::vector<long>(static_cast<std::size_t>(nb), 0));

    auto run_batch = [&](int b) {
        const long lo = n * b / nb, hi = n * (b + 1) / nb;
        std::vector<double> sum(static_cast<std::size_t>(components), 0.0), out(static_cast<std::size_t>(components));
        for (long i = lo; i < hi; ++i) {
            const Sample s = draw_sample(c, seed, static_cast<std::uint64_t>(i));
            f(s, out.data());
            for (int k = 0; k < components; ++k)
                if (std::isfinite(out[k])) {
                    sum[k] += out[k];
                    ++good[k][b];
                }
        }
        for (int k = 0; k < components; ++k) t.means[k][b] = good[k][b] > 0 ? sum[k] / good[k][b] : 0.0;
    };

    const int nt = std::max(1, std::min(opt.threads, nb));
    if (nt == 1) {
        for (int b = 0; b < nb; ++b) run_batch(b);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nt; ++w)
            pool.emplace_back([&, w] {
                for (int b = w; b < nb; b += nt) run_batch(b);
            });
        for (auto& th : pool) th.join();
    }

    t.counts.assign(static_cast<std::size_t>(components), 0);
    for (int k = 0; k < components; ++k) {
        for (int b = 0; b < nb; ++b) t.counts[k] += good[k][b];
        if (static_cast<double>(n - t.counts[k]) > 1e-3 * static_cast<double>(n))
            throw EstimateAborted("more than 0.1% of Monte-Carlo samples are non-finite");
    }
    return t;
}

inline MCEstimate estimate(const std::function<double(const Sample&)>& f, const ChannelParams& c, long n,
                           std::uint64_t seed, const MCOptions& opt = {}) {
    const auto t = estimate_batches([&](const Sample& s, double* out) { out[0] = f(s); }, 1, c, n, seed, opt);
    return t.component(0);
}

enum class MIComponent { i1, i2, i3, singular_pair, total };

struct MIEstimate {
    MCEstimate i0, i1, i2, i3;
    MCEstimate singular_pair;  ///< i1 + i2 on common draws
    MCEstimate total;
    BatchTable table;          ///< per-batch means of i1, i2, i3

    const MCEstimate& get(MIComponent k) const {
        switch (k) {
            case MIComponent::i1: return i1;
            case MIComponent::i2: return i2;
            case MIComponent::i3: return i3;
            case MIComponent::singular_pair: return singular_pair;
            default: return total;
        }
    }
    static std::vector<double> weights(MIComponent k) {
        switch (k) {
            case MIComponent::i1: return {1, 0, 0};
            case MIComponent::i2: return {0, 1, 0};
            case MIComponent::i3: return {0, 0, 1};
            case MIComponent::singular_pair: return {1, 1, 0};
            default: return {1, 1, 1};
        }
    }
};

/// The three sampled integrands of the MI expansion at one draw:
/// I1 = alpha1^2 / 2, I2 = L (alpha1 + alpha2), I3 = -beta1^2 / 2, where L is the
/// log-density ratio of P0[Y|X] to P0_out[Y] minus its constant M log(1 + P/(QL)).
/// The unit term of I2's brace is left out: its average vanishes identically.
///
/// I2 carries the control variate Lx (h1 + h2), Lx = delta sum |X|^2/(P+QL) - M P/(P+QL),
/// with h1 the B-linear part of alpha1 and h2 = (h1^2 - E_B h1^2)/2. Both h terms
/// average to zero over B at every X, so the control variate has mean zero; it
/// removes the X-driven fluctuations of L times the noise-driven ones of alpha.
inline void mi_integrands(const Sample& s, const ChannelParams& c, double* out, bool control_variate = true) {
    const PdfExpansionTerms t = pdf_expansion(s.x, s.y, c);
    const double ql = c.q * c.l, pq = c.p + ql, d = c.grid.delta;
    const double lr = t.log_p0 - p0_out(s.y, c).log_density - c.grid.m_inner * std::log1p(c.p / ql);
    out[0] = 0.5 * t.alpha1 * t.alpha1;
    out[1] = lr * (t.alpha1 + t.alpha2_partial);
    if (control_variate && c.gamma != 0.0) {
        const Spectrum b = b_from_xy(s.x, s.y, c);
        const CVec w = alpha1_linear_weights(s.x, c);
        double h1 = 0.0, w2 = 0.0, lx = -c.grid.m_inner * c.p / pq;
        for (int j = 0; j < c.grid.m_total; ++j) {
            h1 += std::real(std::conj(w[j]) * b[j]);
            w2 += std::norm(w[j]);
            lx += d * std::norm(s.x[j]) / pq;
        }
        const double h2 = 0.5 * (h1 * h1 - 0.5 * w2 * ql / d);
        out[1] -= lx * (h1 + h2);
    }
    if (c.grid.m_total == c.grid.m_inner || c.gamma == 0.0) {
        out[2] = 0.0;
    } else {
        const double b1 = beta1(s.y, c);
        out[2] = -0.5 * b1 * b1;
    }
}

inline MCEstimate analytic_estimate(double value, long n, std::uint64_t seed) {
    MCEstimate e;
    e.mean = value;
    e.n = n;
    e.seed = seed;
    return e;
}

/// Sample with the noise reversed, B -> -B at the same X.
inline Sample mirrored(const Sample& s, const ChannelParams& c) {
    Sample m = s;
    for (auto& v : m.b.values) v = -v;
    m.y = y_from_xb(m.x, m.b, c);
    return m;
}

inline MIEstimate mc_mutual_information(const ChannelParams& c, long n, std::uint64_t seed, const MCOptions& opt = {}) {
    MIEstimate r;
    auto f = [&](const Sample& s, double* out) {
        mi_integrands(s, c, out, opt.control_variate);
        if (!opt.antithetic) return;
        double o2[3];
        mi_integrands(mirrored(s, c), c, o2, opt.control_variate);
        for (int k = 0; k < 3; ++k) out[k] = 0.5 * (out[k] + o2[k]);
    };
    r.table = estimate_batches(f, 3, c, n, seed, opt);
    r.i0 = analytic_estimate(c.grid.m_inner * std::log1p(c.p / (c.q * c.l)), n, seed);
    r.i1 = r.table.component(0);
    r.i2 = r.table.component(1);
    r.i3 = r.table.component(2);
    r.singular_pair = r.table.combine(MIEstimate::weights(MIComponent::singular_pair));
    r.total = r.table.combine(MIEstimate::weights(MIComponent::total));
    r.total.mean += r.i0.mean;
    return r;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double chi2 = 0.0;  ///< weighted residual sum of squares
};

/// Weighted least squares y = intercept + slope x.
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
    if (x.size() != y.size() || x.size() != w.size() || x.size() < 2) throw InvalidArgument("linear_fit: need matching inputs, at least two points");
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    const double den = sw * sxx - sx * sx;
    if (!(std::abs(den) > 1e-12 * sw * sxx)) throw InvalidArgument("linear_fit: ill-conditioned design");
    LinearFit f;
    f.slope = (sw * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / sw;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        f.chi2 += w[i] * r * r;
    }
    return f;
}

struct SingularFit {
    MCEstimate coeff;  ///< slope against gamma~^2 / eps
    double intercept = 0.0;
    double chi2 = 0.0;
    std::vector<double> x;  ///< gamma~^2 / eps per point
    std::vector<MCEstimate> points;
};

/// Regression of MI components on gamma~^2/eps across noise levels at fixed
/// gamma~ and beta~. Every point reuses the same draws, and the slope error comes
/// from batch-wise slopes so that the correlation between points is accounted for.
/// All requested components come from the same runs.
inline std::vector<SingularFit> singular_coefficient_fits(const ChannelParams& base, const std::vector<double>& eps_list,
                                                          long n, std::uint64_t seed,
                                                          const std::vector<MIComponent>& components,
                                                          const MCOptions& opt = {}) {
    if (eps_list.size() < 3) throw InvalidArgument("singular_coefficient_fit needs at least three eps values");
    if (components.empty()) throw InvalidArgument("singular_coefficient_fit needs at least one component");
    const auto [lo, hi] = std::minmax_element(eps_list.begin(), eps_list.end());
    if (*lo <= 0.0 || *hi >= 1.0) throw InvalidArgument("eps values must lie in (0, 1)");
    if (*hi / *lo < 10.0 * (1.0 - 1e-12)) throw InvalidArgument("eps values must span at least one decade");
    const double gt = derived_params(base).gamma_tilde;

    std::vector<double> x;
    std::vector<BatchTable> tables;
    for (double eps : eps_list) {
        ChannelParams c = base;
        c.q = eps * c.p / c.l;
        x.push_back(gt * gt / eps);
        tables.push_back(mc_mutual_information(c, n, seed, opt).table);
    }

    std::vector<SingularFit> fits;
    for (MIComponent component : components) {
        const auto w = MIEstimate::weights(component);
        SingularFit fit;
        fit.x = x;
        std::vector<std::vector<double>> batch_values;
        for (const auto& t : tables) {
            fit.points.push_back(t.combine(w));
            std::vector<double> v(static_cast<std::size_t>(t.batches()), 0.0);
            for (int k = 0; k < 3; ++k)
                for (int b = 0; b < t.batches(); ++b) v[b] += w[k] * t.means[k][b];
            batch_values.push_back(std::move(v));
        }
        std::vector<double> y, wt;
        for (const auto& p : fit.points) {
            y.push_back(p.mean);
            wt.push_back(p.std_error > 0.0 ? 1.0 / (p.std_error * p.std_error) : 1.0);
        }
        const LinearFit lf = linear_fit(fit.x, y, wt);
        fit.intercept = lf.intercept;
        fit.chi2 = lf.chi2;

        const int nb = static_cast<int>(batch_values[0].size());
        std::vector<double> slopes(static_cast<std::size_t>(nb));
        for (int b = 0; b < nb; ++b) {
            std::vector<double> yb;
            for (const auto& v : batch_values) yb.push_back(v[b]);
            slopes[b] = linear_fit(fit.x, yb, wt).slope;
        }
        double ss = 0.0;
        for (double sl : slopes) ss += (sl - lf.slope) * (sl - lf.slope);
        fit.coeff.mean = lf.slope;
        fit.coeff.std_error = std::sqrt(ss / (nb - 1) / nb);
        fit.coeff.n = n;
        fit.coeff.seed = seed;
        for (const auto& p : fit.points) fit.coeff.flagged = std::max(fit.coeff.flagged, p.flagged);
        fits.push_back(std::move(fit));
    }
    return fits;
}

inline SingularFit singular_coefficient_fit(const ChannelParams& base, const std::vector<double>& eps_list, long n,
                                            std::uint64_t seed, MIComponent component = MIComponent::i1,
                                            const MCOptions& opt = {}) {
    return singular_coefficient_fits(base, eps_list, n, seed, {component}, opt).front();
}

}  // namespace nlsemi
