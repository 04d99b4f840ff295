// Low-level numerical helpers shared across the library: deterministic
// pairwise summation, Gauss-Legendre rules, Simpson integration (plain,
// cumulative, adaptive) and bracketed root finding.
#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace osuh {

// Sums a range with a fixed pairwise reduction tree. The result depends only
// on the number of terms, not on evaluation or thread order, so likelihood
// values are bit-stable across runs.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(std::span<const double>(v));
}

// Nodes strictly inside (a, b) with positive weights summing to b - a.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    template <class F>
    double integrate(F&& f) const {
        std::vector<double> terms(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i)
            terms[i] = weights[i] * f(nodes[i]);
        return pairwise_sum(terms);
    }
};

// Gauss-Legendre rule on [a, b]; nodes by Newton iteration on P_n with the
// usual cos-based initial guesses.
inline QuadratureRule gauss_legendre(int n, double a = 0.0, double b = 1.0) {
    if (n < 2) throw std::invalid_argument("gauss_legendre: need at least 2 nodes");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.nodes[i] = 0.5 * (b + a) - 0.5 * (b - a) * x;
        rule.nodes[n - 1 - i] = 0.5 * (b + a) + 0.5 * (b - a) * x;
        rule.weights[i] = 0.5 * (b - a) * w;
        rule.weights[n - 1 - i] = 0.5 * (b - a) * w;
    }
    return rule;
}

namespace detail {

template <class F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <class F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol = 1e-10, int max_depth = 40) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

// Cumulative integral of uniformly sampled values: out[i] ~ int_{x0}^{x_i} f.
// Each interval is integrated by the quartic through its five nearest
// points (order-4 Newton-Cotes), so the edge panels keep full order; small
// inputs fall back to Simpson / trapezoid.
inline std::vector<double> cumulative_integral(std::span<const double> f, double h) {
    const std::size_t n = f.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    if (n == 2) {
        out[1] = 0.5 * h * (f[0] + f[1]);
        return out;
    }
    if (n < 5) {
        for (std::size_t i = 1; i < n; ++i) {
            if (i % 2 == 0)
                out[i] = out[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
            else
                out[i] = (i + 1 < n)
                             ? out[i - 1] + h / 12.0 * (5.0 * f[i - 1] + 8.0 * f[i] - f[i + 1])
                             : out[i - 1] + h / 12.0 * (-f[i - 2] + 8.0 * f[i - 1] + 5.0 * f[i]);
        }
        return out;
    }
    if (n < 7) {
        // Interval weights (x720) for unit subintervals [a, a+1] of the
        // 5-point stencil {0..4}.
        static constexpr double W[4][5] = {{251, 646, -264, 106, -19},
                                           {-19, 346, 456, -74, 11},
                                           {11, -74, 456, 346, -19},
                                           {-19, 106, -264, 646, 251}};
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t s = i < 2 ? 0 : (i + 2 >= n ? n - 5 : i - 2);
            const std::size_t a = i - s;
            double acc = 0.0;
            for (int m = 0; m < 5; ++m) acc += W[a][m] * f[s + m];
            out[i + 1] = out[i] + h * acc / 720.0;
        }
        return out;
    }
    // Interval weights (x60480) for unit subintervals of the 7-point stencil
    // {0..6}; degree-6 exactness keeps edge panels of rapidly vanishing
    // integrands accurate.
    static constexpr double W7[6][7] = {
        {19087, 65112, -46461, 37504, -20211, 6312, -863},
        {-863, 25128, 46989, -16256, 7299, -2088, 271},
        {271, -2760, 30819, 37504, -6771, 1608, -191},
        {-191, 1608, -6771, 37504, 30819, -2760, 271},
        {271, -2088, 7299, -16256, 46989, 25128, -863},
        {-863, 6312, -20211, 37504, -46461, 65112, 19087}};
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t s = i < 3 ? 0 : (i + 3 >= n ? n - 7 : i - 3);
        const std::size_t a = i - s;
        double acc = 0.0;
        for (int m = 0; m < 7; ++m) acc += W7[a][m] * f[s + m];
        out[i + 1] = out[i] + h * acc / 60480.0;
    }
    return out;
}

// Integral of the whole uniformly sampled segment.
inline double segment_integral(std::span<const double> f, double h) {
    auto c = cumulative_integral(f, h);
    return c.empty() ? 0.0 : c.back();
}

// Finds x in [lo, hi] with g(x) = 0 given g(lo) and g(hi) of opposite sign.
// Plain bisection; runs until the bracket collapses to x_tol.
template <class G>
double bisect(G&& g, double lo, double hi, double x_tol = 1e-14, int max_iter = 200) {
    double glo = g(lo);
    double ghi = g(hi);
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    if ((glo < 0.0) == (ghi < 0.0))
        throw std::domain_error("bisect: no sign change on bracket");
    for (int i = 0; i < max_iter && hi - lo > x_tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm == 0.0) return mid;
        if ((gm < 0.0) == (glo < 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// log(sum(exp(v))) with max subtraction.
inline double log_sum_exp(std::span<const double> v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace osuh
