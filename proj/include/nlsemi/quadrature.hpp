#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace nlsemi::quad {

/// Composite trapezoid weights on n+1 equally spaced nodes over [0, length].
inline std::vector<double> trapezoid_weights(int n, double length) {
    std::vector<double> w(static_cast<std::size_t>(n + 1), length / n);
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
}

/// Composite Simpson weights on n + 1 equispaced nodes; odd n falls back to the trapezoid rule.
inline std::vector<double> simpson_weights(int n, double length) {
    if (n % 2 != 0) return trapezoid_weights(n, length);
    const double h = length / n;
    std::vector<double> w(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) w[static_cast<std::size_t>(i)] = (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0)) * h / 3.0;
    return w;
}

struct Rule {
    std::vector<double> x;
    std::vector<double> w;
};

/// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n.
inline Rule gauss_legendre(int n) {
    Rule r;
    r.x.resize(static_cast<std::size_t>(n));
    r.w.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        r.x[i] = -x;
        r.x[n - 1 - i] = x;
        r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

/// Gauss-Laguerre nodes for weight e^{-x} on [0, inf).
inline Rule gauss_laguerre(int n) {
    Rule r;
    r.x.resize(static_cast<std::size_t>(n));
    r.w.resize(static_cast<std::size_t>(n));
    double x = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i == 0) x = 3.0 / (1.0 + 2.4 * n);
        else if (i == 1) x += 15.0 / (1.0 + 2.5 * n);
        else x += (1.0 + 2.55 * (i - 1)) / (1.9 * (i - 1)) * (x - r.x[i - 2]);
        double p1 = 0.0, p2 = 0.0;
        for (int it = 0; it < 200; ++it) {
            p1 = 1.0;
            p2 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * k - 1.0 - x) * p2 - (k - 1.0) * p3) / k;
            }
            const double pp = n * (p1 - p2) / x;
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) <= 1e-15 * std::max(1.0, x)) break;
        }
        r.x[i] = x;
        // w_i = x_i / ((n+1)^2 L_{n+1}(x_i)^2)
        double l0 = 1.0, l1 = 1.0 - x;
        for (int k = 1; k <= n; ++k) {
            const double l2 = ((2.0 * k + 1.0 - x) * l1 - k * l0) / (k + 1.0);
            l0 = l1;
            l1 = l2;
        }
        r.w[i] = x / ((n + 1.0) * (n + 1.0) * l1 * l1);
    }
    return r;
}

namespace detail {
inline constexpr double kronrod_x[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                        0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kronrod_w[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double gauss7_w[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                       0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
};

inline Segment gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    double k = kronrod_w[7] * fc;
    double g = gauss7_w[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const double f1 = f(c - h * kronrod_x[i]);
        const double f2 = f(c + h * kronrod_x[i]);
        k += kronrod_w[i] * (f1 + f2);
        if (i % 2 == 1) g += gauss7_w[i / 2] * (f1 + f2);
    }
    return {a, b, k * h, std::abs((k - g) * h)};
}
}  // namespace detail

struct AdaptiveResult {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Globally adaptive Gauss-Kronrod (7/15) integration on [a, b].
inline AdaptiveResult adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol,
                               double rel_tol = 0.0, int max_segments = 2000) {
    std::vector<detail::Segment> heap{detail::gk15(f, a, b)};
    auto cmp = [](const detail::Segment& l, const detail::Segment& r) { return l.error < r.error; };
    double value = heap.front().value, error = heap.front().error;
    int evals = 15;
    while (error > std::max(abs_tol, rel_tol * std::abs(value)) && static_cast<int>(heap.size()) < max_segments) {
        std::pop_heap(heap.begin(), heap.end(), cmp);
        const detail::Segment worst = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        const detail::Segment l = detail::gk15(f, worst.a, mid);
        const detail::Segment r = detail::gk15(f, mid, worst.b);
        evals += 30;
        heap.push_back(l);
        std::push_heap(heap.begin(), heap.end(), cmp);
        heap.push_back(r);
        std::push_heap(heap.begin(), heap.end(), cmp);
        value = 0.0;
        error = 0.0;
        for (const auto& s : heap) {
            value += s.value;
            error += s.error;
        }
    }
    return {value, error, evals, error <= std::max(abs_tol, rel_tol * std::abs(value))};
}

}  // namespace nlsemi::quad
