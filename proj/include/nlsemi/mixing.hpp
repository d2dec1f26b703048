#pragma once

// Four-wave mixing index tables. A quartet (j, j1, j2, j3) satisfies
// j3 = j1 + j2 - j, either inside the lattice (truncate) or modulo M' (periodic).
// The mixing phase is mu = i * kappa * m with kappa = 2 beta L dw^2 and
// m = (j - j1)(j - j2), which equals i beta L (w^2 + w3^2 - w1^2 - w2^2) for
// unwrapped quartets.

#include <vector>

#include "domain.hpp"

namespace nlsemi {

struct Quartet {
    int j, j1, j2, j3;
    int m;
};

class MixingTable {
public:
    MixingTable() = default;
    MixingTable(int m_total, Closure closure) : m_total_(m_total), offsets_(m_total + 1, 0) {
        for (int j = 0; j < m_total; ++j) {
            offsets_[j] = static_cast<int>(quartets_.size());
            for (int j1 = 0; j1 < m_total; ++j1) {
                for (int j2 = 0; j2 < m_total; ++j2) {
                    int j3 = j1 + j2 - j;
                    if (closure == Closure::periodic) {
                        j3 = ((j3 % m_total) + m_total) % m_total;
                    } else if (j3 < 0 || j3 >= m_total) {
                        continue;
                    }
                    quartets_.push_back({j, j1, j2, j3, (j - j1) * (j - j2)});
                }
            }
        }
        offsets_[m_total] = static_cast<int>(quartets_.size());
    }

    explicit MixingTable(const ChannelParams& c) : MixingTable(c.grid.m_total, c.closure) {}

    int m_total() const { return m_total_; }
    const std::vector<Quartet>& quartets() const { return quartets_; }
    /// Quartets with output index j occupy [begin(j), end(j)).
    int begin(int j) const { return offsets_[j]; }
    int end(int j) const { return offsets_[j + 1]; }
    const Quartet& operator[](int k) const { return quartets_[k]; }

private:
    int m_total_ = 0;
    std::vector<Quartet> quartets_;
    std::vector<int> offsets_;
};

inline double mixing_kappa(const ChannelParams& c) { return 2.0 * c.beta * c.l * c.grid.dw * c.grid.dw; }

/// out_j = delta^2 sum_q e^{-i kappa m t} a_{j1} b_{j2} conj(c_{j3}).
inline CVec mix(const MixingTable& tab, double delta, double kappa, double t, const CVec& a, const CVec& b,
                const CVec& c) {
    CVec out(static_cast<std::size_t>(tab.m_total()));
    for (int j = 0; j < tab.m_total(); ++j) {
        cplx acc{};
        for (int k = tab.begin(j); k < tab.end(j); ++k) {
            const Quartet& q = tab[k];
            const cplx ph = q.m == 0 ? cplx{1.0} : std::polar(1.0, -kappa * q.m * t);
            acc += ph * a[q.j1] * b[q.j2] * std::conj(c[q.j3]);
        }
        out[j] = delta * delta * acc;
    }
    return out;
}

}  // namespace nlsemi
