#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "idop/errors.hpp"

namespace idop {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
    double gradient_norm = std::numeric_limits<double>::quiet_NaN();
};

struct QuasiNewtonOptions {
    int max_iter = 500;
    double grad_tol = 1e-6;
    // Near sqrt(machine epsilon): the optimal forward-difference step for
    // smooth objectives. Larger steps put a noise floor under the iterates.
    double fd_step = 1e-8;
};

struct SimplexOptions {
    int max_iter = 5000;
    double f_tol = 1e-10;
    double initial_scale = 0.1;
};

/// Thrown when no finite step can be found from the current iterate; carries
/// the best point seen so far.
class OptimizationFailure : public NumericError {
public:
    OptimizationFailure(const std::string& what, OptResult best)
        : NumericError(what), best_(std::move(best)) {}
    const OptResult& best() const { return best_; }

private:
    OptResult best_;
};

namespace detail {

inline Eigen::VectorXd forward_gradient(const Objective& f, const Eigen::VectorXd& x,
                                        double fx, double fd_step) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = fd_step * (1.0 + std::abs(x[i]));
        xp[i] = x[i] + h;
        const double fp = f(xp);
        g[i] = std::isfinite(fp) ? (fp - fx) / h : 0.0;
        xp[i] = x[i];
    }
    return g;
}

}  // namespace detail

/// BFGS with forward-difference gradients and an Armijo backtracking line
/// search (c = 1e-4, halving). Non-finite trial values reject the step and
/// halve; if no finite descent step exists the best iterate is raised inside
/// an OptimizationFailure.
inline OptResult minimize_quasi_newton(const Objective& f, Eigen::VectorXd x0,
                                       QuasiNewtonOptions opts = {}) {
    const auto dim = x0.size();
    double fx = f(x0);
    if (!std::isfinite(fx)) throw ValidationError("objective is not finite at x0");

    OptResult best{x0, fx, 0, false, std::numeric_limits<double>::quiet_NaN()};
    Eigen::VectorXd x = std::move(x0);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::VectorXd g = detail::forward_gradient(f, x, fx, opts.fd_step);

    for (int iter = 0; iter <= opts.max_iter; ++iter) {
        best.iterations = iter;
        best.gradient_norm = g.norm();
        if (best.gradient_norm <= opts.grad_tol) {
            best.converged = true;
            return best;
        }
        if (iter == opts.max_iter) break;

        Eigen::VectorXd dir = -(hinv * g);
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {  // stale curvature; fall back to steepest descent
            hinv.setIdentity();
            dir = -g;
            slope = g.dot(dir);
        }

        double step = 1.0;
        double fnew = std::numeric_limits<double>::infinity();
        Eigen::VectorXd xnew;
        bool accepted = false;
        while (step > 1e-20) {
            xnew = x + step * dir;
            fnew = f(xnew);
            if (std::isfinite(fnew) && fnew <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw OptimizationFailure("line search found no finite descent step", best);

        Eigen::VectorXd gnew = detail::forward_gradient(f, xnew, fnew, opts.fd_step);
        Eigen::VectorXd s = xnew - x;
        Eigen::VectorXd ydiff = gnew - g;
        const double sy = s.dot(ydiff);
        if (sy > 1e-12 * s.norm() * ydiff.norm()) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd left =
                Eigen::MatrixXd::Identity(dim, dim) - rho * s * ydiff.transpose();
            hinv = left * hinv * left.transpose() + rho * s * s.transpose();
        }

        x = std::move(xnew);
        fx = fnew;
        g = std::move(gnew);
        if (fx < best.f) {
            best.x = x;
            best.f = fx;
        }
    }
    return best;
}

/// Nelder-Mead with the standard reflection/expansion/contraction/shrink
/// coefficients (1, 2, 0.5, 0.5). Non-finite objective values sort as +inf,
/// so the simplex walks away from them.
inline OptResult minimize_simplex(const Objective& f, Eigen::VectorXd x0,
                                  SimplexOptions opts = {}) {
    const auto dim = x0.size();
    const double f0 = f(x0);
    if (!std::isfinite(f0)) throw ValidationError("objective is not finite at x0");

    auto safe = [&](const Eigen::VectorXd& p) {
        const double v = f(p);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<Eigen::VectorXd> pts(static_cast<size_t>(dim) + 1, x0);
    std::vector<double> fv(static_cast<size_t>(dim) + 1, f0);
    for (Eigen::Index i = 0; i < dim; ++i) {
        pts[static_cast<size_t>(i) + 1][i] += opts.initial_scale * (1.0 + std::abs(x0[i]));
        fv[static_cast<size_t>(i) + 1] = safe(pts[static_cast<size_t>(i) + 1]);
    }

    std::vector<size_t> idx(pts.size());
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        std::iota(idx.begin(), idx.end(), size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return fv[a] < fv[b]; });
        const size_t lo = idx.front(), hi = idx.back(), second_hi = idx[idx.size() - 2];
        if (std::isfinite(fv[hi]) && fv[hi] - fv[lo] < opts.f_tol) {
            // A flat spread alone can be a symmetric straddle of a kink;
            // require the simplex itself to have collapsed as well.
            double diam = 0.0;
            for (size_t k = 1; k < idx.size(); ++k)
                diam = std::max(diam, (pts[idx[k]] - pts[lo]).lpNorm<Eigen::Infinity>());
            if (diam < std::sqrt(opts.f_tol)) break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
        for (size_t k = 0; k + 1 < idx.size(); ++k) centroid += pts[idx[k]];
        centroid /= static_cast<double>(dim);

        Eigen::VectorXd refl = centroid + (centroid - pts[hi]);
        const double frefl = safe(refl);
        if (frefl < fv[lo]) {
            Eigen::VectorXd expd = centroid + 2.0 * (centroid - pts[hi]);
            const double fexpd = safe(expd);
            if (fexpd < frefl) {
                pts[hi] = std::move(expd);
                fv[hi] = fexpd;
            } else {
                pts[hi] = std::move(refl);
                fv[hi] = frefl;
            }
        } else if (frefl < fv[second_hi]) {
            pts[hi] = std::move(refl);
            fv[hi] = frefl;
        } else {
            Eigen::VectorXd contr = centroid + 0.5 * (pts[hi] - centroid);
            const double fcontr = safe(contr);
            if (fcontr < fv[hi]) {
                pts[hi] = std::move(contr);
                fv[hi] = fcontr;
            } else {
                for (size_t k = 1; k < idx.size(); ++k) {
                    pts[idx[k]] = pts[lo] + 0.5 * (pts[idx[k]] - pts[lo]);
                    fv[idx[k]] = safe(pts[idx[k]]);
                }
            }
        }
    }

    size_t lo = 0;
    for (size_t k = 1; k < fv.size(); ++k)
        if (fv[k] < fv[lo]) lo = k;

    OptResult res;
    res.x = pts[lo];
    res.f = fv[lo];
    res.iterations = iter;
    res.converged = iter < opts.max_iter;
    return res;
}

}  // namespace idop
