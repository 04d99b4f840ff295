// Dense BFGS minimizer with backtracking (Armijo) line search, for the
// smooth unconstrained problems produced by the softmax reparametrization.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace osuh {

struct BfgsOptions {
    int max_iters = 2000;
    double grad_tol = 1e-6;      // sup-norm of the gradient
    double obj_rel_tol = 1e-10;  // relative objective change ...
    int stall_window = 5;        // ... sustained over this many iterations
};

struct BfgsResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    std::vector<double> grad;
    int iterations = 0;
    bool converged = false;
    double grad_sup = std::numeric_limits<double>::infinity();
    std::vector<double> trace;  // objective after each accepted step
};

namespace detail {

inline double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace detail

// fg(x, grad) must return f(x) and fill grad with the gradient.
// Line-search failures terminate the run at the current (still monotone)
// iterate rather than throwing.
template <class FG>
BfgsResult bfgs_minimize(FG&& fg, std::vector<double> x0, const BfgsOptions& opt = {}) {
    const std::size_t n = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.grad.assign(n, 0.0);
    res.f = fg(res.x, res.grad);
    res.trace.push_back(res.f);

    std::vector<double> H(n * n, 0.0);  // inverse Hessian approximation
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;

    std::vector<double> dir(n), x_new(n), g_new(n), s(n), y(n), Hy(n);
    int stall = 0;
    for (res.iterations = 0; res.iterations < opt.max_iters; ++res.iterations) {
        res.grad_sup = detail::sup_norm(res.grad);
        if (res.grad_sup < opt.grad_tol) {
            res.converged = true;
            break;
        }

        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            for (std::size_t j = 0; j < n; ++j) d += H[i * n + j] * res.grad[j];
            dir[i] = -d;
        }
        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) slope += dir[i] * res.grad[i];
        if (!(slope < 0.0)) {
            // Reset to steepest descent if H lost positive definiteness.
            for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (i != j) H[i * n + j] = 0.0;
            for (std::size_t i = 0; i < n; ++i) dir[i] = -res.grad[i];
            slope = 0.0;
            for (std::size_t i = 0; i < n; ++i) slope += dir[i] * res.grad[i];
            if (!(slope < 0.0)) break;
        }

        double step = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * dir[i];
            bool ok = true;
            try {
                f_new = fg(x_new, g_new);
            } catch (const std::exception&) {
                ok = false;
            }
            if (ok && std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        double sy = 0.0, yy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - res.x[i];
            y[i] = g_new[i] - res.grad[i];
            sy += s[i] * y[i];
            yy += y[i] * y[i];
        }

        const double rel_change = std::abs(res.f - f_new) / (1.0 + std::abs(res.f));
        res.x = x_new;
        res.f = f_new;
        res.grad = g_new;
        res.trace.push_back(res.f);

        if (rel_change < opt.obj_rel_tol) {
            if (++stall >= opt.stall_window) {
                res.grad_sup = detail::sup_norm(res.grad);
                res.converged = true;
                break;
            }
        } else {
            stall = 0;
        }

        if (sy > 1e-12 * std::sqrt(yy) * std::sqrt(std::inner_product(
                            s.begin(), s.end(), s.begin(), 0.0))) {
            if (res.iterations == 0) {
                const double scale = sy / yy;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) H[i * n + j] = (i == j) ? scale : 0.0;
            }
            const double rho = 1.0 / sy;
            for (std::size_t i = 0; i < n; ++i) {
                double a = 0.0;
                for (std::size_t j = 0; j < n; ++j) a += H[i * n + j] * y[j];
                Hy[i] = a;
            }
            double yHy = 0.0;
            for (std::size_t i = 0; i < n; ++i) yHy += y[i] * Hy[i];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    H[i * n + j] += -rho * (Hy[i] * s[j] + s[i] * Hy[j]) +
                                    rho * rho * yHy * s[i] * s[j] + rho * s[i] * s[j];
        }
    }
    res.grad_sup = detail::sup_norm(res.grad);
    if (res.grad_sup < opt.grad_tol) res.converged = true;
    return res;
}

}  // namespace osuh
