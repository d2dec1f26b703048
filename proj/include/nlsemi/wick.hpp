#pragma once

// Exact Gaussian expectations of field polynomials by complete pairing of each
// field with a conjugate partner (Wick's theorem for circular complex fields).

#include <array>
#include <functional>
#include <map>
#include <vector>

#include "domain.hpp"
#include "polynomial.hpp"

namespace nlsemi {

/// Two-point functions <F_j conj(F_k)> per field family; all other pairs vanish.
class CovarianceModel {
public:
    CovarianceModel() = default;
    explicit CovarianceModel(int m_total) : m_(m_total) {
        for (auto& c : cov_) c.assign(static_cast<std::size_t>(m_ * m_), cplx{});
        diagonal_.fill(true);
    }

    /// X: P/delta on the inner band; B: QL/delta; Y: QL/delta outer and (P+QL)/delta inner.
    static CovarianceModel standard(const ChannelParams& c) {
        CovarianceModel m(c.grid.m_total);
        const double d = c.grid.delta, ql = c.q * c.l;
        for (int j = 0; j < c.grid.m_total; ++j) {
            const bool in = c.grid.is_inner(j);
            m.set(Family::X, j, j, in ? c.p / d : 0.0);
            m.set(Family::B, j, j, ql / d);
            m.set(Family::Y, j, j, in ? (c.p + ql) / d : ql / d);
        }
        return m;
    }

    int m_total() const { return m_; }
    void set(Family f, int j, int k, cplx v) {
        cov_[idx(f)][static_cast<std::size_t>(j * m_ + k)] = v;
        if (j != k && v != cplx{}) diagonal_[idx(f)] = false;
    }
    cplx get(Family f, int j, int k) const { return cov_[idx(f)][static_cast<std::size_t>(j * m_ + k)]; }
    bool diagonal(Family f) const { return diagonal_[idx(f)]; }

private:
    static std::size_t idx(Family f) { return static_cast<std::size_t>(f); }
    int m_ = 0;
    std::array<std::vector<cplx>, 3> cov_;
    std::array<bool, 3> diagonal_{true, true, true};
};

using FamilySet = unsigned;
inline constexpr FamilySet family_bit(Family f) { return 1u << static_cast<unsigned>(f); }
inline constexpr FamilySet all_families = 7u;

namespace detail {

/// Permanent of the pairing matrix C[a_i][b_k] by inclusion over subsets.
inline cplx pairing_permanent(const CovarianceModel& cov, Family f, const int* a, const int* b, int n) {
    if (n == 0) return 1.0;
    std::vector<cplx> dp(std::size_t{1} << n, cplx{});
    dp[0] = 1.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (dp[mask] == cplx{}) continue;
        const int i = __builtin_popcount(mask);
        if (i >= n) continue;
        for (int k = 0; k < n; ++k)
            if (!(mask & (1u << k))) {
                const cplx c = cov.get(f, a[i], b[k]);
                if (c != cplx{}) dp[mask | (1u << k)] += dp[mask] * c;
            }
    }
    return dp[(std::size_t{1} << n) - 1];
}

struct ContractResult {
    cplx value;
    MonoKey rest;
    int pairs[3];
};

/// Contract every factor whose family is in `set`; the rest is returned symbolically.
inline ContractResult contract(const MonoKey& key, FamilySet set, const CovarianceModel& cov) {
    ContractResult r{1.0, MonoKey{}, {0, 0, 0}};
    int plain_modes[3][MonoKey::capacity], bar_modes[3][MonoKey::capacity];
    int np[3] = {0, 0, 0}, nb[3] = {0, 0, 0};
    for (int i = 0; i < key.size(); ++i) {
        const auto code = key[i];
        const FieldKind k = MonoKey::kind(code);
        const int f = static_cast<int>(family_of(k));
        if (!(set & (1u << f))) {
            r.rest.push(code);
            continue;
        }
        if (is_conjugate(k)) bar_modes[f][nb[f]++] = MonoKey::mode(code);
        else plain_modes[f][np[f]++] = MonoKey::mode(code);
    }
    for (int f = 0; f < 3; ++f) {
        if (!(set & (1u << f))) continue;
        if (np[f] != nb[f]) {
            r.value = 0.0;
            return r;
        }
        r.pairs[f] = np[f];
        if (np[f] == 0) continue;
        const Family fam = static_cast<Family>(f);
        if (cov.diagonal(fam)) {
            // modes are sorted within each run, so equal multisets compare elementwise
            for (int i = 0; i < np[f]; ++i)
                if (plain_modes[f][i] != bar_modes[f][i]) {
                    r.value = 0.0;
                    return r;
                }
            int i = 0;
            while (i < np[f]) {
                int j = i;
                while (j < np[f] && plain_modes[f][j] == plain_modes[f][i]) ++j;
                const cplx c = cov.get(fam, plain_modes[f][i], plain_modes[f][i]);
                for (int k = 1; k <= j - i; ++k) r.value *= c * double(k);
                i = j;
            }
        } else {
            r.value *= pairing_permanent(cov, fam, plain_modes[f], bar_modes[f], np[f]);
        }
        if (r.value == cplx{}) return r;
    }
    return r;
}

}  // namespace detail

inline cplx wick_expectation(const WickExpression& e, const CovarianceModel& cov) {
    cplx s{};
    for (const auto& [k, c] : e.terms()) s += c * detail::contract(k, all_families, cov).value;
    return s;
}

inline WickExpression partial_contract(const WickExpression& e, FamilySet set, const CovarianceModel& cov) {
    WickExpression r;
    double scale = 0.0;
    for (const auto& [k, c] : e.terms()) {
        const auto res = detail::contract(k, set, cov);
        if (res.value == cplx{}) continue;
        const cplx v = c * res.value;
        r.add(res.rest, v);
        scale = std::max(scale, std::abs(v));
    }
    r.set_scale(scale);
    return r;
}

/// Sum of terms together with the largest single contribution.
struct Accum {
    cplx sum{};
    double scale = 0.0;
    void add(cplx v) {
        sum += v;
        scale = std::max(scale, std::abs(v));
    }
    void merge(const Accum& o, cplx w = 1.0) {
        sum += w * o.sum;
        scale = std::max(scale, std::abs(w) * o.scale);
    }
    double relative() const { return scale > 0.0 ? std::abs(sum) / scale : 0.0; }
};

/// Full expectation of a product of expressions, bucketed by the number of
/// contracted pairs of the `graded` family.
inline std::map<int, Accum> graded_expectation(const std::vector<const WickExpression*>& factors,
                                               const CovarianceModel& cov, Family graded) {
    std::map<int, Accum> out;
    std::vector<std::vector<std::pair<MonoKey, cplx>>> lists;
    for (const auto* f : factors) {
        std::vector<std::pair<MonoKey, cplx>> v(f->terms().begin(), f->terms().end());
        lists.push_back(std::move(v));
    }
    const int nf = static_cast<int>(lists.size());
    std::function<void(int, const MonoKey&, cplx)> rec = [&](int level, const MonoKey& key, cplx coeff) {
        if (level == nf) {
            const auto r = detail::contract(key, all_families, cov);
            if (r.value == cplx{}) return;
            out[r.pairs[static_cast<int>(graded)]].add(coeff * r.value);
            return;
        }
        for (const auto& [k, c] : lists[static_cast<std::size_t>(level)]) rec(level + 1, key * k, coeff * c);
    };
    rec(0, MonoKey{}, 1.0);
    return out;
}

}  // namespace nlsemi
