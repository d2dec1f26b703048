#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "nlsemi/action.hpp"
#include "nlsemi/quadrature.hpp"
#include "nlsemi/wick_verify.hpp"

using namespace nlsemi;
using Catch::Approx;

namespace {

MonoKey key(std::initializer_list<FieldFactor> f) { return MonoKey::of(f); }

WickExpression single(std::initializer_list<FieldFactor> f, cplx c = 1.0) {
    WickExpression e;
    e.add(MonoKey::of(f), c);
    return e;
}

// Random Hermitian positive semi-definite B covariance on four modes.
CovarianceModel random_covariance(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    const int m = 4;
    std::vector<cplx> a(m * m);
    for (auto& v : a) v = {n(rng), n(rng)};
    CovarianceModel cov(m);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
            cplx s{};
            for (int r = 0; r < m; ++r) s += a[j * m + r] * std::conj(a[k * m + r]);
            cov.set(Family::B, j, k, s);
        }
    return cov;
}

ChannelParams desk(int m, int mt, double bt, Closure cl = Closure::periodic, int nz = 64) {
    return params_from_dimensionless(0.05, 0.7, bt, FrequencyGrid::make(m, mt, 3.0), nz, cl);
}

}  // namespace

TEST_CASE("two-point functions follow the standard covariances", "[wick]") {
    ChannelParams c = desk(3, 3, 0.0);
    c.q = 0.01;
    c.l = 2.0;
    const auto cov = CovarianceModel::standard(c);
    const double d = c.grid.delta;
    CHECK(wick_expectation(single({{FieldKind::B, 1}, {FieldKind::Bbar, 1}}), cov).real() == Approx(c.q * c.l / d));
    CHECK(wick_expectation(single({{FieldKind::B, 1}}), cov) == cplx{});
    CHECK(wick_expectation(single({{FieldKind::B, 1}, {FieldKind::B, 1}}), cov) == cplx{});
    CHECK(wick_expectation(single({{FieldKind::B, 0}, {FieldKind::Bbar, 2}}), cov) == cplx{});
    CHECK(wick_expectation(single({{FieldKind::X, 2}, {FieldKind::Xbar, 2}}), cov).real() == Approx(c.p / d));
    CHECK(wick_expectation(single({{FieldKind::X, 0}, {FieldKind::Bbar, 0}}), cov) == cplx{});
}

TEST_CASE("four-point function equals the sum of both pairings for random covariances", "[wick]") {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto cov = random_covariance(rng);
        const int j1 = trial % 4, j2 = (trial / 4) % 4, j3 = (trial / 16) % 4, j4 = (trial * 7 + 1) % 4;
        const auto e = single({{FieldKind::B, j1}, {FieldKind::B, j2}, {FieldKind::Bbar, j3}, {FieldKind::Bbar, j4}});
        const cplx expect = cov.get(Family::B, j1, j3) * cov.get(Family::B, j2, j4) +
                            cov.get(Family::B, j1, j4) * cov.get(Family::B, j2, j3);
        worst = std::max(worst, std::abs(wick_expectation(e, cov) - expect) / std::max(1.0, std::abs(expect)));
    }
    CHECK(worst < 1e-13);
}

TEST_CASE("repeated mode moments count all pairings", "[wick]") {
    CovarianceModel cov(2);
    const cplx v{0.7, 0.0};
    cov.set(Family::B, 0, 0, v);
    double factorial = 1.0;
    for (int n = 1; n <= 6; ++n) {
        factorial *= n;
        MonoKey k;
        for (int i = 0; i < n; ++i) {
            k.push(MonoKey::encode(FieldKind::B, 0));
            k.push(MonoKey::encode(FieldKind::Bbar, 0));
        }
        k.sort();
        WickExpression e;
        e.add(k, 1.0);
        CHECK(wick_expectation(e, cov).real() == Approx(factorial * std::pow(0.7, n)).epsilon(1e-13));
    }
    // Dense covariance takes the permanent path and must agree with the diagonal fast path.
    CovarianceModel dense(2);
    dense.set(Family::B, 0, 0, v);
    dense.set(Family::B, 1, 0, cplx{1e-300, 0.0});
    REQUIRE_FALSE(dense.diagonal(Family::B));
    const auto e = single({{FieldKind::B, 0}, {FieldKind::B, 0}, {FieldKind::B, 0}, {FieldKind::Bbar, 0},
                           {FieldKind::Bbar, 0}, {FieldKind::Bbar, 0}});
    CHECK(wick_expectation(e, dense).real() == Approx(6.0 * std::pow(0.7, 3)).epsilon(1e-13));
}

TEST_CASE("expectation is linear and respects conjugation", "[wick]") {
    std::mt19937_64 rng(11);
    const auto cov = random_covariance(rng);
    std::uniform_int_distribution<int> mode(0, 3), kind(2, 3);
    std::normal_distribution<double> n;
    auto random_expr = [&] {
        WickExpression e;
        for (int t = 0; t < 6; ++t) {
            MonoKey k;
            for (int f = 0; f < 4; ++f) k.push(MonoKey::encode(static_cast<FieldKind>(f % 2 ? 3 : 2), mode(rng)));
            k.sort();
            e.add(k, cplx{n(rng), n(rng)});
        }
        return e;
    };
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_expr(), b = random_expr();
        const cplx s{0.3, -1.1};
        const cplx lhs = wick_expectation(a + s * b, cov);
        const cplx rhs = wick_expectation(a, cov) + s * wick_expectation(b, cov);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
        CHECK(std::abs(wick_expectation(a.conj(), cov) - std::conj(wick_expectation(a, cov))) <=
              1e-12 * (1.0 + std::abs(wick_expectation(a, cov))));
    }
    (void)kind;
}

TEST_CASE("partial contraction over one family", "[wick]") {
    ChannelParams c = desk(2, 2, 0.0);
    const auto cov = CovarianceModel::standard(c);
    const double bb = c.q * c.l / c.grid.delta;

    const auto r = partial_contract(single({{FieldKind::B, 0}, {FieldKind::Bbar, 0}, {FieldKind::X, 1}, {FieldKind::Xbar, 1}}),
                                    family_bit(Family::B), cov);
    REQUIRE(r.size() == 1);
    CHECK(r.terms().begin()->first == key({{FieldKind::X, 1}, {FieldKind::Xbar, 1}}));
    CHECK(r.terms().begin()->second.real() == Approx(bb));

    CHECK(partial_contract(single({{FieldKind::B, 0}, {FieldKind::X, 1}}), family_bit(Family::B), cov).max_coefficient() == 0.0);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> mode(0, 1), fam(0, 3);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 25; ++trial) {
        WickExpression e;
        for (int t = 0; t < 10; ++t) {
            MonoKey k;
            for (int f = 0; f < 6; ++f) k.push(MonoKey::encode(static_cast<FieldKind>(fam(rng)), mode(rng)));
            k.sort();
            e.add(k, cplx{n(rng), n(rng)});
        }
        const auto staged = partial_contract(partial_contract(e, family_bit(Family::B), cov), family_bit(Family::X), cov);
        const auto joint = partial_contract(e, family_bit(Family::B) | family_bit(Family::X), cov);
        CHECK(std::abs(wick_expectation(staged, cov) - wick_expectation(joint, cov)) <=
              1e-12 * (1.0 + std::abs(wick_expectation(joint, cov))));
        CHECK(std::abs(wick_expectation(joint, cov) - wick_expectation(e, cov)) <= 1e-12 * (1.0 + std::abs(wick_expectation(e, cov))));
    }
}

TEST_CASE("graded expectation splits by the number of B pairs", "[wick]") {
    ChannelParams c = desk(2, 2, 0.0);
    const auto cov = CovarianceModel::standard(c);
    const auto e = single({{FieldKind::B, 0}, {FieldKind::Bbar, 0}, {FieldKind::X, 1}, {FieldKind::Xbar, 1}}) +
                   single({{FieldKind::X, 0}, {FieldKind::Xbar, 0}});
    const auto g = graded_expectation({&e, &e}, cov, Family::B);
    cplx total{};
    for (const auto& [pairs, acc] : g) total += acc.sum;
    const auto sq = e * e;
    CHECK(std::abs(total - wick_expectation(sq, cov)) < 1e-10 * std::abs(total));
    CHECK(g.count(0) == 1);
    CHECK(g.count(1) == 1);
    CHECK(g.count(2) == 1);
}

TEST_CASE("exponential-polynomial calculus matches quadrature", "[wick]") {
    const auto rule = quad::gauss_legendre(80);
    auto numeric = [&](const ExpPoly& f, double kappa, double upper) {
        cplx s{};
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            const double t = 0.5 * upper * (rule.x[i] + 1.0);
            s += 0.5 * upper * rule.w[i] * f.evaluate(t, kappa);
        }
        return s;
    };
    for (double kappa : {0.0, 0.05, 0.7, 3.0, 25.0}) {
        ExpCalculus calc(kappa);
        ExpPoly f = ExpPoly::monomial({1.0, 0.5}, 3, 2) + ExpPoly::monomial(-0.4, 0, -1) + ExpPoly::monomial({0.0, 2.0}, 5, 3) +
                    ExpPoly::monomial(1.5, 1, 0);
        CHECK(std::abs(calc.integrate01(f) - numeric(f, kappa, 1.0)) < 1e-12);
        const ExpPoly big = calc.antiderivative(f);
        for (double t : {0.0, 0.3, 0.77, 1.0})
            CHECK(std::abs(big.evaluate(t, kappa) - numeric(f, kappa, t)) < 1e-11);
        for (int n = 0; n <= 12; ++n)
            for (int m : {-3, 1, 4})
                CHECK(std::abs(calc.moment(n, m) - numeric(ExpPoly::monomial(1.0, n, m), kappa, 1.0)) < 1e-12);
    }
}

TEST_CASE("builders agree with the numeric functionals", "[wick][builders]") {
    int configurations = 0;
    double worst = 0.0;
    for (auto cl : {Closure::truncate, Closure::periodic})
        for (double bt : {0.0, 0.5, 2.0})
            for (auto [m, mt] : {std::pair{2, 2}, std::pair{3, 3}, std::pair{2, 4}}) {
                const ChannelParams c = desk(m, mt, bt, cl, 1024);
                const auto x = sample_input(c, 100 + configurations), b = sample_b(c, 200 + configurations);
                const auto fv = field_values(x, b);
                auto rel = [](double a, double e) { return std::abs(a - e) / std::max(std::abs(e), 1e-12); };
                const double r1 = rel(evaluate(build_s1_expr(c), fv).real(), s1(x, b, c));
                const double r2 = rel(evaluate(build_s2_expr(c), fv).real(), s2(x, b, c));
                const double r3 = rel(evaluate(build_gamma10_expr(c), fv).real(), gamma10(x, b, c, Gamma10Path::closed_form));
                const double r4 = rel(evaluate(build_alpha01_expr(c), fv).real(), alpha01(x, b, c));
                const double r5 = rel(evaluate(build_alpha11_expr(c), fv).real(), alpha11(x, b, c));
                INFO("closure " << to_string(cl) << " bt " << bt << " m " << m << " mt " << mt);
                CHECK(r1 < 1e-6);
                CHECK(r2 < 1e-6);
                CHECK(r3 < 1e-6);
                CHECK(r4 < 1e-6);
                CHECK(r5 < 1e-6);
                worst = std::max({worst, r1, r2, r3, r4, r5});
                ++configurations;
            }
    CHECK(configurations >= 18);
    for (double bt : {0.0, 1.0, 3.0})
        for (auto [m, mt] : {std::pair{1, 3}, std::pair{2, 4}}) {
            const ChannelParams c = desk(m, mt, bt, Closure::truncate, 1024);
            const auto y = sample_b(c, 17 + configurations);
            const double num = beta1(y, c);
            const double sym = evaluate(build_beta1_expr(c), FieldValues{{}, {}, y.values}).real();
            CHECK(std::abs(sym - num) <= 1e-6 * std::max(std::abs(num), 1e-12));
            ++configurations;
        }
    CHECK(configurations >= 20);
    INFO("worst relative difference " << worst);
    CHECK(worst < 1e-6);
}

TEST_CASE("builder edge cases", "[wick][builders]") {
    ChannelParams c = desk(3, 3, 1.0);
    CHECK(build_beta1_expr(c).max_coefficient() == 0.0);
    c.gamma = 0.0;
    CHECK(build_s1_expr(c).max_coefficient() == 0.0);
    CHECK(build_s2_expr(c).max_coefficient() == 0.0);
    ChannelParams w = desk(1, 3, 1.0);
    w.gamma = 0.0;
    CHECK(build_beta1_expr(w).max_coefficient() == 0.0);
    CHECK_THROWS_AS(ExpressionBuilder(desk(4, 8, 0.0)), SizeGuard);
}

TEST_CASE("normalization identity holds exactly", "[wick][verify]") {
    for (int m : {2, 3})
        for (double bt : {0.0, 1.0}) {
            const auto r = verify_normalization(desk(m, m, bt));
            CHECK(r.passed);
            CHECK(r.residual == 0.0);
            CHECK(r.scale > 0.0);
        }
    VerifyOptions bad;
    bad.corrupt = 1e-6;
    const auto r = verify_normalization(desk(2, 2, 1.0), bad);
    CHECK_FALSE(r.passed);
    CHECK(r.residual > 1e-8);
    CHECK_THROWS_AS(verify_normalization(desk(2, 4, 0.0)), InvalidArgument);
}

TEST_CASE("order-gamma contributions cancel", "[wick][verify]") {
    for (auto cl : {Closure::truncate, Closure::periodic})
        for (double bt : {0.0, 1.0}) {
            const auto r = verify_order_gamma(desk(3, 3, bt, cl));
            CHECK(r.passed);
            CHECK(r.residual < 1e-13);
        }
    VerifyOptions bad;
    bad.corrupt = 1e-6;
    CHECK_FALSE(verify_order_gamma(desk(2, 2, 1.0), bad).passed);
}

TEST_CASE("leading singular orders carry compensating noise factors", "[wick][verify]") {
    for (int k : {1, 2}) {
        const auto r = verify_leading_singular(desk(3, 3, 1.0), k);
        CHECK(r.passed);
        CHECK(r.scale > 0.0);
        VerifyOptions bad;
        bad.corrupt = 1e-3;
        CHECK_FALSE(verify_leading_singular(desk(2, 2, 1.0), k, bad).passed);
    }
    CHECK_THROWS_AS(verify_leading_singular(desk(4, 4, 1.0), 2), SizeGuard);
    CHECK_THROWS_AS(verify_leading_singular(desk(2, 2, 1.0), 3), InvalidArgument);
}

TEST_CASE("singular coefficients cancel and approach G", "[wick][verify]") {
    for (auto cl : {Closure::truncate, Closure::periodic})
        for (int m : {2, 3})
            for (double bt : {0.0, 1.0}) {
                const ChannelParams c = desk(m, m, bt, cl);
                const auto r = verify_singular_cancellation(c);
                CHECK(r.passed);
                CHECK(r.residual <= 1e-12);
                const double expect = cl == Closure::periodic ? g_function_discrete(bt, m) : g_function_discrete_truncated(bt, m);
                CHECK(r.values[2].second == Approx(expect).epsilon(1e-12));
            }
    CHECK(singular_i1_coefficient(desk(2, 2, 0.0)) == Approx(1.5).epsilon(1e-12));
    CHECK(singular_i1_coefficient(desk(2, 2, 0.0, Closure::truncate)) == Approx(1.375).epsilon(1e-12));

    double previous = 1.0;
    for (int m : {2, 3, 4}) {
        const double dev = std::abs(singular_i1_coefficient(desk(m, m, 1.0)) - g_function(1.0));
        CHECK(dev < previous);
        previous = dev;
    }
    CHECK(previous < 1e-3);
    VerifyOptions bad;
    bad.corrupt = 1e-6;
    CHECK_FALSE(verify_singular_cancellation(desk(2, 2, 1.0), bad).passed);
}

TEST_CASE("I3 and I0 from the symbolic expansion", "[wick]") {
    CHECK(compute_i3(desk(3, 3, 1.0)) == 0.0);
    const ChannelParams c = desk(1, 3, 0.0, Closure::truncate, 1024);
    const double i3 = compute_i3(c);
    CHECK(i3 <= 0.0);
    // Monte-Carlo oracle of -<beta1^2>/2 over the output Gaussian.
    double acc = 0.0;
    const int n = 4000;
    for (int s = 0; s < n; ++s) {
        Spectrum y = sample_b(c, 900 + s);
        const double sy = std::sqrt((c.p + c.q * c.l) / (c.q * c.l));
        for (int j = c.grid.inner_begin(); j < c.grid.inner_end(); ++j) y.values[j] *= sy;
        const double b1 = beta1(y, c);
        acc += b1 * b1;
    }
    CHECK(i3 == Approx(-0.5 * acc / n).epsilon(0.15));
    CHECK_THROWS_AS(compute_i3(desk(2, 8, 0.0)), SizeGuard);

    const ChannelParams d = desk(3, 3, 0.0);
    CHECK(compute_i0(d) == Approx(d.grid.m_inner * std::log1p(d.p / (d.q * d.l))).epsilon(1e-12));
}
