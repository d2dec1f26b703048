#pragma once

// Polynomials in circular complex Gaussian lattice fields with generic coefficients.

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "exp_poly.hpp"

namespace nlsemi {

enum class FieldKind : std::uint8_t { X = 0, Xbar = 1, B = 2, Bbar = 3, Y = 4, Ybar = 5 };
enum class Family : std::uint8_t { X = 0, B = 1, Y = 2 };

inline Family family_of(FieldKind k) { return static_cast<Family>(static_cast<int>(k) / 2); }
inline bool is_conjugate(FieldKind k) { return static_cast<int>(k) % 2 == 1; }
inline FieldKind conjugate(FieldKind k) { return static_cast<FieldKind>(static_cast<int>(k) ^ 1); }
inline FieldKind plain(Family f) { return static_cast<FieldKind>(2 * static_cast<int>(f)); }
inline FieldKind barred(Family f) { return static_cast<FieldKind>(2 * static_cast<int>(f) + 1); }

struct FieldFactor {
    FieldKind kind;
    int mode;
};

/// Canonically ordered product of at most `capacity` field factors.
class MonoKey {
public:
    static constexpr int capacity = 12;
    using Code = std::uint16_t;

    MonoKey() { codes_.fill(0xFFFF); }
    static Code encode(FieldKind k, int mode) { return static_cast<Code>(static_cast<int>(k) << 8 | mode); }
    static FieldKind kind(Code c) { return static_cast<FieldKind>(c >> 8); }
    static int mode(Code c) { return c & 0xFF; }

    static MonoKey of(std::initializer_list<FieldFactor> fs) {
        MonoKey k;
        for (const auto& f : fs) k.push(encode(f.kind, f.mode));
        k.sort();
        return k;
    }

    int size() const { return n_; }
    Code operator[](int i) const { return codes_[static_cast<std::size_t>(i)]; }
    void push(Code c) {
        if (n_ >= capacity) throw SizeGuard("monomial degree exceeds capacity");
        codes_[static_cast<std::size_t>(n_++)] = c;
    }
    void sort() { std::sort(codes_.begin(), codes_.begin() + n_); }

    friend MonoKey operator*(const MonoKey& a, const MonoKey& b) {
        if (a.n_ + b.n_ > capacity) throw SizeGuard("monomial degree exceeds capacity");
        MonoKey r;
        std::merge(a.codes_.begin(), a.codes_.begin() + a.n_, b.codes_.begin(), b.codes_.begin() + b.n_, r.codes_.begin());
        r.n_ = static_cast<std::uint8_t>(a.n_ + b.n_);
        return r;
    }

    MonoKey conj() const {
        MonoKey r;
        for (int i = 0; i < n_; ++i) r.push(encode(conjugate(kind(codes_[i])), mode(codes_[i])));
        r.sort();
        return r;
    }

    bool operator==(const MonoKey& o) const { return n_ == o.n_ && codes_ == o.codes_; }
    bool operator<(const MonoKey& o) const {
        return n_ != o.n_ ? n_ < o.n_ : std::lexicographical_compare(codes_.begin(), codes_.end(), o.codes_.begin(), o.codes_.end());
    }

    std::size_t hash() const {
        std::uint64_t h = 1469598103934665603ull ^ n_;
        for (int i = 0; i < n_; ++i) h = (h ^ codes_[static_cast<std::size_t>(i)]) * 1099511628211ull;
        return static_cast<std::size_t>(h ^ (h >> 29));
    }

private:
    std::array<Code, capacity> codes_{};
    std::uint8_t n_ = 0;
};

struct MonoKeyHash {
    std::size_t operator()(const MonoKey& k) const { return k.hash(); }
};

inline double coeff_magnitude(const cplx& c) { return std::abs(c); }
inline double coeff_magnitude(const ExpPoly& e) { return e.magnitude(); }
inline cplx coeff_conj(const cplx& c) { return std::conj(c); }
inline ExpPoly coeff_conj(const ExpPoly& e) { return e.conj(); }

/// Sparse polynomial with merged canonical monomials.
template <class C>
class Polynomial {
public:
    using Map = std::unordered_map<MonoKey, C, MonoKeyHash>;

    Polynomial() = default;
    static Polynomial term(const MonoKey& k, C c) {
        Polynomial p;
        p.add(k, std::move(c));
        return p;
    }

    void add(const MonoKey& k, const C& c) {
        auto [it, inserted] = terms_.try_emplace(k, c);
        if (!inserted) it->second += c;
        scale_ = std::max(scale_, coeff_magnitude(c));
    }

    const Map& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }
    /// Largest coefficient magnitude seen while building (before cancellations).
    double scale() const { return scale_; }
    void set_scale(double s) { scale_ = s; }

    Polynomial& operator+=(const Polynomial& o) {
        for (const auto& [k, c] : o.terms_) add(k, c);
        scale_ = std::max(scale_, o.scale_);
        return *this;
    }
    Polynomial& operator*=(cplx s) {
        for (auto& [k, c] : terms_) c *= s;
        scale_ *= std::abs(s);
        return *this;
    }
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator*(cplx s, Polynomial a) { return a *= s; }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        Polynomial r;
        r.terms_.reserve(a.size() * b.size() / 2 + 1);
        for (const auto& [ka, ca] : a.terms_)
            for (const auto& [kb, cb] : b.terms_) r.add(ka * kb, ca * cb);
        return r;
    }

    Polynomial conj() const {
        Polynomial r;
        for (const auto& [k, c] : terms_) r.add(k.conj(), coeff_conj(c));
        r.scale_ = scale_;
        return r;
    }

    template <class F>
    auto map_coefficients(F&& f) const {
        using R = decltype(f(std::declval<const C&>()));
        Polynomial<R> r;
        for (const auto& [k, c] : terms_) r.add(k, f(c));
        r.set_scale(std::max(r.scale(), scale_));
        return r;
    }

    /// Drop terms whose magnitude is below rel * scale(); returns the largest dropped magnitude.
    double prune(double rel) {
        double dropped = 0.0;
        const double cut = rel * scale_;
        for (auto it = terms_.begin(); it != terms_.end();) {
            const double m = coeff_magnitude(it->second);
            if (m <= cut) {
                dropped = std::max(dropped, m);
                it = terms_.erase(it);
            } else {
                ++it;
            }
        }
        return dropped;
    }

    double max_coefficient() const {
        double m = 0.0;
        for (const auto& [k, c] : terms_) m = std::max(m, coeff_magnitude(c));
        return m;
    }

    /// Deterministic ordering of keys, used for reproducible reporting.
    std::vector<MonoKey> sorted_keys() const {
        std::vector<MonoKey> ks;
        ks.reserve(terms_.size());
        for (const auto& [k, c] : terms_) ks.push_back(k);
        std::sort(ks.begin(), ks.end());
        return ks;
    }

    C& at(const MonoKey& k) { return terms_.at(k); }

private:
    Map terms_;
    double scale_ = 0.0;
};

using WickExpression = Polynomial<cplx>;
using TimeExpression = Polynomial<ExpPoly>;

/// Numeric field values used to evaluate an expression.
struct FieldValues {
    std::vector<cplx> x, b, y;

    cplx value(MonoKey::Code code) const {
        const FieldKind k = MonoKey::kind(code);
        const int j = MonoKey::mode(code);
        const std::vector<cplx>* v = nullptr;
        switch (family_of(k)) {
            case Family::X: v = &x; break;
            case Family::B: v = &b; break;
            case Family::Y: v = &y; break;
        }
        const cplx z = (*v)[static_cast<std::size_t>(j)];
        return is_conjugate(k) ? std::conj(z) : z;
    }
};

inline cplx evaluate(const WickExpression& e, const FieldValues& f) {
    cplx s{};
    for (const auto& [k, c] : e.terms()) {
        cplx m = c;
        for (int i = 0; i < k.size(); ++i) m *= f.value(k[i]);
        s += m;
    }
    return s;
}

}  // namespace nlsemi
