#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "idop/errors.hpp"
#include "idop/ingest.hpp"

namespace idop {

struct LassoOptions {
    double tol = 1e-10;   // max coefficient change per cycle, standardized scale
    int max_cycles = 5000;
};

struct LassoResult {
    Eigen::VectorXd beta;  // original scale, zero for dropped columns
    double intercept = 0.0;
    std::vector<Eigen::Index> dropped;   // zero-variance columns forced to 0
    std::vector<double> objective_trace; // penalized objective after each full cycle
    int cycles = 0;
};

/// Regulators selected for one target, ordered by descending |coefficient|.
struct RegulatorSet {
    std::string target;
    std::vector<std::pair<std::string, double>> regulators;
    double lambda_used = 0.0;
};

struct SelectOptions {
    int cv_folds = 5;
    int max_regulators = 10;
    int lambda_count = 50;
    double lambda_min_ratio = 1e-3;
    LassoOptions lasso;
};

namespace detail {

struct Standardized {
    Eigen::MatrixXd x;        // centered, unit population variance
    Eigen::VectorXd y;        // centered
    Eigen::VectorXd mean;     // column means
    Eigen::VectorXd scale;    // column standard deviations (0 where dropped)
    double y_mean = 0.0;
    std::vector<Eigen::Index> dropped;
};

inline Standardized standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Standardized s;
    const Eigen::Index n = x.rows(), p = x.cols();
    s.mean = x.colwise().mean();
    s.x = x.rowwise() - s.mean.transpose();
    s.scale.resize(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const double var = s.x.col(k).squaredNorm() / static_cast<double>(n);
        s.scale[k] = std::sqrt(var);
        if (s.scale[k] > 0.0)
            s.x.col(k) /= s.scale[k];
        else {
            s.x.col(k).setZero();
            s.dropped.push_back(k);
        }
    }
    s.y_mean = y.mean();
    s.y = y.array() - s.y_mean;
    return s;
}

inline double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

/// Cyclic coordinate descent on the standardized problem
/// (1/2N)||y - Xb||^2 + lambda ||b||_1; unit column variance makes each
/// coordinate update a single soft threshold.
inline void descend(const Standardized& s, double lambda, Eigen::VectorXd& b,
                    const LassoOptions& opts, std::vector<double>* trace = nullptr,
                    int* cycles_out = nullptr) {
    const Eigen::Index n = s.x.rows(), p = s.x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::VectorXd resid = s.y - s.x * b;
    int cycle = 0;
    for (; cycle < opts.max_cycles; ++cycle) {
        double max_delta = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (s.scale[k] == 0.0) { b[k] = 0.0; continue; }
            const double old = b[k];
            const double z = inv_n * s.x.col(k).dot(resid) + old;
            const double upd = soft_threshold(z, lambda);
            if (upd != old) {
                resid += s.x.col(k) * (old - upd);
                b[k] = upd;
                max_delta = std::max(max_delta, std::abs(upd - old));
            }
        }
        if (trace)
            trace->push_back(0.5 * inv_n * resid.squaredNorm() + lambda * b.cwiseAbs().sum());
        if (max_delta < opts.tol) { ++cycle; break; }
    }
    if (cycles_out) *cycles_out = cycle;
}

}  // namespace detail

/// Smallest lambda at which every coefficient is zero.
inline double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    detail::Standardized s = detail::standardize(x, y);
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    return (s.x.transpose() * s.y).cwiseAbs().maxCoeff() * inv_n;
}

/// LASSO at a single lambda. Columns are standardized internally; returned
/// coefficients are on the original scale with the unpenalized intercept
/// reported separately.
inline LassoResult lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                             const LassoOptions& opts = {}) {
    if (x.rows() != y.size()) throw ValidationError("X rows must match y length");
    if (x.rows() < 2) throw ValidationError("lasso needs at least 2 samples");
    if (lambda < 0.0) throw ValidationError("lambda must be nonnegative");

    detail::Standardized s = detail::standardize(x, y);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
    LassoResult res;
    detail::descend(s, lambda, b, opts, &res.objective_trace, &res.cycles);

    res.beta.resize(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k)
        res.beta[k] = s.scale[k] > 0.0 ? b[k] / s.scale[k] : 0.0;
    res.intercept = s.y_mean - res.beta.dot(s.mean);
    res.dropped = s.dropped;
    return res;
}

/// Maximum KKT violation of a solution, evaluated on the standardized
/// problem: |(1/N) X_k' r - sign stationarity| for active coordinates and
/// max(0, |(1/N) X_k' r| - lambda) for zero ones.
inline double lasso_kkt_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 double lambda, const LassoResult& fit) {
    detail::Standardized s = detail::standardize(x, y);
    Eigen::VectorXd b(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) b[k] = fit.beta[k] * s.scale[k];
    const Eigen::VectorXd resid = s.y - s.x * b;
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    double worst = 0.0;
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        if (s.scale[k] == 0.0) continue;
        const double corr = inv_n * s.x.col(k).dot(resid);
        if (b[k] != 0.0)
            worst = std::max(worst, std::abs(corr - lambda * (b[k] > 0 ? 1.0 : -1.0)));
        else
            worst = std::max(worst, std::max(0.0, std::abs(corr) - lambda));
    }
    return worst;
}

/// Log-spaced lambda path from lambda_max down to ratio * lambda_max.
inline std::vector<double> lasso_lambda_grid(double lambda_max, int count, double min_ratio) {
    if (count < 1 || lambda_max <= 0.0) return {std::max(lambda_max, 0.0)};
    std::vector<double> grid(static_cast<size_t>(count));
    if (count == 1) { grid[0] = lambda_max; return grid; }
    const double lo = std::log(lambda_max * min_ratio), hi = std::log(lambda_max);
    for (int i = 0; i < count; ++i)
        grid[static_cast<size_t>(i)] =
            std::exp(hi + (lo - hi) * static_cast<double>(i) / static_cast<double>(count - 1));
    return grid;
}

/// Regresses the target on all other variables, chooses lambda by k-fold
/// cross validation (min mean validation MSE, folds by sample index modulo
/// k), and keeps the strongest nonzero coefficients as regulators.
inline RegulatorSet select_regulators(const ExpressionMatrix& matrix, const std::string& target,
                                      const SelectOptions& opts = {}) {
    const Eigen::Index m = matrix.variables(), n = matrix.samples();
    if (m < 2) throw ValidationError("regulator selection needs at least 2 variables");
    if (n < opts.cv_folds)
        throw ValidationError("cannot form " + std::to_string(opts.cv_folds) + " folds from " +
                              std::to_string(n) + " samples");

    const Eigen::Index t = matrix.variable_position(target);
    std::vector<Eigen::Index> predictors;
    predictors.reserve(static_cast<size_t>(m) - 1);
    for (Eigen::Index j = 0; j < m; ++j)
        if (j != t) predictors.push_back(j);

    Eigen::MatrixXd x(n, m - 1);
    for (size_t c = 0; c < predictors.size(); ++c)
        x.col(static_cast<Eigen::Index>(c)) = matrix.values.row(predictors[c]).transpose();
    Eigen::VectorXd y = matrix.values.row(t).transpose();

    const double lmax = lasso_lambda_max(x, y);
    RegulatorSet set;
    set.target = target;
    if (lmax <= 0.0) {  // constant target: nothing to explain
        set.lambda_used = 0.0;
        return set;
    }
    const std::vector<double> grid =
        lasso_lambda_grid(lmax, opts.lambda_count, opts.lambda_min_ratio);

    Eigen::VectorXd cv_sse = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    for (int fold = 0; fold < opts.cv_folds; ++fold) {
        std::vector<Eigen::Index> train, val;
        for (Eigen::Index i = 0; i < n; ++i)
            (i % opts.cv_folds == fold ? val : train).push_back(i);
        Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), m - 1);
        Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
        for (size_t r = 0; r < train.size(); ++r) {
            xt.row(static_cast<Eigen::Index>(r)) = x.row(train[r]);
            yt[static_cast<Eigen::Index>(r)] = y[train[r]];
        }
        detail::Standardized st = detail::standardize(xt, yt);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m - 1);
        for (size_t gi = 0; gi < grid.size(); ++gi) {
            detail::descend(st, grid[gi], b, opts.lasso);
            Eigen::VectorXd beta(m - 1);
            for (Eigen::Index k = 0; k < m - 1; ++k)
                beta[k] = st.scale[k] > 0.0 ? b[k] / st.scale[k] : 0.0;
            const double intercept = st.y_mean - beta.dot(st.mean);
            for (Eigen::Index vi : val) {
                const double pred = intercept + x.row(vi).dot(beta);
                cv_sse[static_cast<Eigen::Index>(gi)] += (y[vi] - pred) * (y[vi] - pred);
            }
        }
    }

    size_t best = 0;  // ties resolve to the larger lambda (earlier in grid)
    for (size_t gi = 1; gi < grid.size(); ++gi)
        if (cv_sse[static_cast<Eigen::Index>(gi)] < cv_sse[static_cast<Eigen::Index>(best)])
            best = gi;
    set.lambda_used = grid[best];

    LassoResult final_fit = lasso_fit(x, y, set.lambda_used, opts.lasso);
    std::vector<std::pair<std::string, double>> found;
    for (Eigen::Index k = 0; k < m - 1; ++k)
        if (final_fit.beta[k] != 0.0)
            found.emplace_back(matrix.variable_ids[static_cast<size_t>(predictors[static_cast<size_t>(k)])],
                               final_fit.beta[k]);
    std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
        return std::abs(a.second) > std::abs(b.second);
    });
    if (static_cast<int>(found.size()) > opts.max_regulators)
        found.resize(static_cast<size_t>(opts.max_regulators));
    set.regulators = std::move(found);
    return set;
}

}  // namespace idop
