#pragma once

// Functions of t in [0, 1] of the form sum_m p_m(t) e^{i kappa m t}, with p_m a
// complex polynomial. Products, conjugates, antiderivatives and the integral
// over [0, 1] are exact up to floating rounding.

#include <cmath>
#include <complex>
#include <map>
#include <unordered_map>
#include <vector>

namespace nlsemi {

using cplx = std::complex<double>;

class ExpCalculus;

class ExpPoly {
public:
    using Poly = std::vector<cplx>;

    ExpPoly() = default;
    static ExpPoly constant(cplx c) {
        ExpPoly e;
        if (c != cplx{}) e.terms_[0] = Poly{c};
        return e;
    }
    /// c * t^n * e^{i kappa m t}
    static ExpPoly monomial(cplx c, int n, int m) {
        ExpPoly e;
        if (c == cplx{}) return e;
        Poly p(static_cast<std::size_t>(n + 1));
        p[n] = c;
        e.terms_[m] = std::move(p);
        return e;
    }

    bool empty() const { return terms_.empty(); }
    const std::map<int, Poly>& terms() const { return terms_; }

    ExpPoly& operator+=(const ExpPoly& o) {
        for (const auto& [m, p] : o.terms_) {
            Poly& q = terms_[m];
            if (q.size() < p.size()) q.resize(p.size());
            for (std::size_t k = 0; k < p.size(); ++k) q[k] += p[k];
        }
        return *this;
    }
    ExpPoly& operator*=(cplx s) {
        for (auto& [m, p] : terms_)
            for (auto& v : p) v *= s;
        return *this;
    }
    friend ExpPoly operator*(const ExpPoly& a, const ExpPoly& b) {
        ExpPoly r;
        for (const auto& [ma, pa] : a.terms_)
            for (const auto& [mb, pb] : b.terms_) {
                Poly& q = r.terms_[ma + mb];
                if (q.size() < pa.size() + pb.size() - 1) q.resize(pa.size() + pb.size() - 1);
                for (std::size_t i = 0; i < pa.size(); ++i)
                    for (std::size_t k = 0; k < pb.size(); ++k) q[i + k] += pa[i] * pb[k];
            }
        return r;
    }
    friend ExpPoly operator*(cplx s, ExpPoly a) { return a *= s; }
    friend ExpPoly operator+(ExpPoly a, const ExpPoly& b) { return a += b; }

    ExpPoly conj() const {
        ExpPoly r;
        for (const auto& [m, p] : terms_) {
            Poly q(p.size());
            for (std::size_t k = 0; k < p.size(); ++k) q[k] = std::conj(p[k]);
            r.terms_[-m] = std::move(q);
        }
        return r;
    }

    /// Multiply by t.
    ExpPoly times_t() const {
        ExpPoly r;
        for (const auto& [m, p] : terms_) {
            Poly q(p.size() + 1);
            for (std::size_t k = 0; k < p.size(); ++k) q[k + 1] = p[k];
            r.terms_[m] = std::move(q);
        }
        return r;
    }

    /// Sum of coefficient magnitudes, an upper bound on |f(t)| for t in [0, 1].
    double magnitude() const {
        double s = 0.0;
        for (const auto& [m, p] : terms_)
            for (const auto& v : p) s += std::abs(v);
        return s;
    }

    cplx evaluate(double t, double kappa) const {
        cplx s{};
        for (const auto& [m, p] : terms_) {
            cplx acc{};
            for (std::size_t k = p.size(); k-- > 0;) acc = acc * t + p[k];
            s += acc * std::polar(1.0, kappa * m * t);
        }
        return s;
    }

private:
    friend class ExpCalculus;
    std::map<int, Poly> terms_;
};

/// Integration rules for a fixed phase unit kappa, with memoised moments.
class ExpCalculus {
public:
    explicit ExpCalculus(double kappa) : kappa_(kappa) {}
    double kappa() const { return kappa_; }

    /// int_0^1 t^n e^{i lambda t} dt with lambda = kappa m.
    cplx moment(int n, int m) {
        if (m < 0) return std::conj(moment(n, -m));
        const long key = static_cast<long>(m) * 4096 + n;
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        const cplx v = raw_moment(n, kappa_ * m);
        cache_.emplace(key, v);
        return v;
    }

    cplx integrate01(const ExpPoly& f) {
        cplx s{};
        for (const auto& [m, p] : f.terms_)
            for (std::size_t k = 0; k < p.size(); ++k)
                if (p[k] != cplx{}) s += p[k] * moment(static_cast<int>(k), m);
        return s;
    }

    /// F(t) = int_0^t f(s) ds.
    ExpPoly antiderivative(const ExpPoly& f) const {
        ExpPoly r;
        for (const auto& [m, p] : f.terms_) {
            const double lam = kappa_ * m;
            for (std::size_t n = 0; n < p.size(); ++n) {
                if (p[n] == cplx{}) continue;
                if (lam == 0.0) {
                    r += ExpPoly::monomial(p[n] / double(n + 1), static_cast<int>(n + 1), 0);
                } else if (std::abs(lam) > n + 2.0) {
                    add_closed_form(r, p[n], static_cast<int>(n), m, lam);
                } else {
                    add_taylor(r, p[n], static_cast<int>(n), lam);
                }
            }
        }
        return r;
    }

private:
    static cplx raw_moment(int n, double lam) {
        if (lam == 0.0) return 1.0 / (n + 1.0);
        const cplx il{0.0, lam};
        if (std::abs(lam) <= 1.0) {
            cplx term{1.0}, s{};
            for (int k = 0; k < 200; ++k) {
                const cplx add = term / double(n + k + 1);
                s += add;
                if (std::abs(add) < 1e-18 * std::abs(s)) break;
                term *= il / double(k + 1);
            }
            return s;
        }
        const cplx e = std::polar(1.0, lam);
        if (n < std::abs(lam)) {
            cplx v = (e - 1.0) / il;
            for (int k = 1; k <= n; ++k) v = (e - double(k) * v) / il;
            return v;
        }
        const int top = n + 60 + static_cast<int>(2.0 * std::abs(lam));
        cplx v = e / (top + 1.0);
        for (int k = top; k > n; --k) v = (e - il * v) / double(k);
        return v;
    }

    // int_0^t s^n e^{i lam s} ds = e^{i lam t} P(t) - P(0), P = sum_k (-1)^k n!/(n-k)! t^{n-k} / (i lam)^{k+1}.
    static void add_closed_form(ExpPoly& r, cplx c, int n, int m, double lam) {
        const cplx il{0.0, lam};
        ExpPoly::Poly p(static_cast<std::size_t>(n + 1));
        cplx fac = c / il;
        for (int k = 0; k <= n; ++k) {
            p[n - k] += fac;
            fac *= -double(n - k) / il;
        }
        const cplx p0 = p[0];
        ExpPoly e;
        e.terms_[m] = std::move(p);
        r += e;
        r += ExpPoly::constant(-p0);
    }

    static void add_taylor(ExpPoly& r, cplx c, int n, double lam) {
        const cplx il{0.0, lam};
        cplx term = c;
        for (int k = 0; k < 400; ++k) {
            r += ExpPoly::monomial(term / double(n + k + 1), n + k + 1, 0);
            term *= il / double(k + 1);
            if (std::abs(term) < 1e-19 * std::abs(c)) break;
        }
    }

    double kappa_;
    std::unordered_map<long, cplx> cache_;
};

}  // namespace nlsemi
