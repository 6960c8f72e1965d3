#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "idop/errors.hpp"
#include "idop/ingest.hpp"
#include "idop/optim.hpp"
#include "idop/select.hpp"

namespace idop {

/// Values of the Legendre polynomials Q_0..Q_r at nu in [-1, 1], from the
/// closed-form coefficient sum with M = floor(k/2) per basis member:
///   Q_r(nu) = 2^-r * sum_m (-1)^m C(r,m) C(2r-2m,r) nu^(r-2m).
inline Eigen::VectorXd legendre_basis(int order, double nu) {
    if (order < 0) throw ValidationError("legendre order must be >= 0");
    if (nu < -1.0 - 1e-9 || nu > 1.0 + 1e-9)
        throw ValidationError("legendre basis evaluated outside [-1, 1]");
    nu = std::clamp(nu, -1.0, 1.0);

    auto binom = [](int n, int k) {
        double r = 1.0;
        for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
        return r;
    };
    Eigen::VectorXd q(order + 1);
    for (int r = 0; r <= order; ++r) {
        const double scale = std::pow(0.5, r);
        double acc = 0.0;
        for (int m = 0; m <= r / 2; ++m) {
            const double coef = binom(r, m) * binom(2 * r - 2 * m, r);
            const double term = coef * std::pow(nu, r - 2 * m);
            acc += (m % 2 ? -term : term);
        }
        q[r] = scale * acc;
    }
    return q;
}

/// Least-squares projection onto Q_0..Q_r over the scaled index.
struct LegendreCurve {
    int order = 0;
    Eigen::VectorXd coefficients;

    double evaluate(double nu) const { return legendre_basis(order, nu).dot(coefficients); }
};

inline LegendreCurve lop_smooth(const ScaledIndex& scaled, const Eigen::VectorXd& y, int order) {
    const Eigen::Index n = scaled.scaled.size();
    if (y.size() != n) throw ValidationError("observation length must match the index");
    if (n <= order)
        throw ValidationError("smoothing order " + std::to_string(order) +
                              " is underdetermined with " + std::to_string(n) + " samples");
    Eigen::MatrixXd design(n, order + 1);
    for (Eigen::Index i = 0; i < n; ++i)
        design.row(i) = legendre_basis(order, scaled.scaled[i]).transpose();
    LegendreCurve curve;
    curve.order = order;
    curve.coefficients = design.colPivHouseholderQr().solve(y);
    return curve;
}

namespace detail {

inline bool state_finite(double v) { return std::isfinite(v); }
template <class Derived>
inline bool state_finite(const Eigen::MatrixBase<Derived>& v) { return v.allFinite(); }

/// Splits [grid] into RK4 steps: each interval is cut into equal sub-steps no
/// wider than max_step (default: domain width / 200).
inline std::vector<double> dense_grid(const std::vector<double>& grid, double max_step) {
    if (grid.size() < 2) return grid;
    for (size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ValidationError("integration grid must be strictly increasing");
    if (max_step <= 0.0) max_step = (grid.back() - grid.front()) / 200.0;
    std::vector<double> dense;
    dense.push_back(grid.front());
    for (size_t i = 1; i < grid.size(); ++i) {
        const double a = grid[i - 1], b = grid[i];
        const auto parts = static_cast<int>(std::ceil((b - a) / max_step - 1e-12));
        for (int p = 1; p < parts; ++p)
            dense.push_back(a + (b - a) * static_cast<double>(p) / parts);
        dense.push_back(b);
    }
    return dense;
}

}  // namespace detail

/// Classic RK4 over a strictly increasing grid, sub-stepping each interval so
/// accuracy does not depend on sample spacing. Returns the trajectory at the
/// grid points; the first entry is y0.
template <class State, class Field>
std::vector<State> rk4_integrate(const Field& f, State y0, const std::vector<double>& grid,
                                 double max_step = 0.0) {
    if (grid.empty()) return {};
    std::vector<State> out;
    out.reserve(grid.size());
    out.push_back(y0);
    if (grid.size() == 1) return out;

    std::vector<double> dense = detail::dense_grid(grid, max_step);
    State y = std::move(y0);
    size_t next_report = 1;
    for (size_t i = 0; i + 1 < dense.size(); ++i) {
        const double e = dense[i];
        const double h = dense[i + 1] - e;
        State k1 = f(e, y);
        State k2 = f(e + h / 2.0, State(y + (h / 2.0) * k1));
        State k3 = f(e + h / 2.0, State(y + (h / 2.0) * k2));
        State k4 = f(e + h, State(y + h * k3));
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!detail::state_finite(y))
            throw IntegrationError("trajectory became non-finite", dense[i + 1]);
        if (next_report < grid.size() && dense[i + 1] == grid[next_report]) {
            out.push_back(y);
            ++next_report;
        }
    }
    if (out.size() != grid.size())
        throw IntegrationError("integration grid bookkeeping failed", grid.back());
    return out;
}

/// Lotka-Volterra predator-prey system; the synthetic-data oracle for the
/// fitting tests.
struct LvParams {
    double alpha, beta, gamma, delta;
};

struct LvTrajectories {
    std::vector<double> prey, predator;
};

inline LvTrajectories simulate_lv(const LvParams& p, std::pair<double, double> y0,
                                  const std::vector<double>& grid, double max_step = 0.0) {
    if (!(p.alpha > 0 && p.beta > 0 && p.gamma > 0 && p.delta > 0))
        throw ValidationError("LV parameters must be positive");
    auto field = [&p](double, const Eigen::Vector2d& s) {
        return Eigen::Vector2d(p.alpha * s[0] - p.beta * s[0] * s[1],
                               p.delta * s[0] * s[1] - p.gamma * s[1]);
    };
    auto traj = rk4_integrate(field, Eigen::Vector2d(y0.first, y0.second), grid, max_step);
    LvTrajectories out;
    out.prey.reserve(traj.size());
    out.predator.reserve(traj.size());
    for (const auto& s : traj) {
        out.prey.push_back(s[0]);
        out.predator.push_back(s[1]);
    }
    return out;
}

/// Dense RK4 solution of dy/dE = rate * y + sum_k coeffs[k] * forcing_k(E)
/// with per-component cumulative increments. Stage values of each component
/// are shared with the total update, so the decomposition sums to the
/// trajectory exactly.
struct DecomposedTrajectory {
    std::vector<double> grid;                      // dense
    std::vector<double> total;                     // total[0] = y0
    std::vector<double> self_cumulative;           // starts at 0
    std::vector<std::vector<double>> dep_cumulative;  // one per forcing, start at 0
};

inline DecomposedTrajectory integrate_decomposed(double rate, const Eigen::VectorXd& coeffs,
                                                 const std::vector<LegendreCurve>& forcings,
                                                 double y0, const std::vector<double>& sample_grid,
                                                 double max_step = 0.0) {
    if (static_cast<size_t>(coeffs.size()) != forcings.size())
        throw ValidationError("coefficient/forcing count mismatch");
    DecomposedTrajectory out;
    out.grid = detail::dense_grid(sample_grid, max_step);
    const size_t npts = out.grid.size(), d = forcings.size();

    // forcing values at nodes and interval midpoints
    std::vector<std::vector<double>> at_node(d), at_mid(d);
    for (size_t k = 0; k < d; ++k) {
        at_node[k].resize(npts);
        at_mid[k].resize(npts > 0 ? npts - 1 : 0);
        for (size_t i = 0; i < npts; ++i) at_node[k][i] = forcings[k].evaluate(out.grid[i]);
        for (size_t i = 0; i + 1 < npts; ++i)
            at_mid[k][i] = forcings[k].evaluate(0.5 * (out.grid[i] + out.grid[i + 1]));
    }

    out.total.assign(npts, 0.0);
    out.self_cumulative.assign(npts, 0.0);
    out.dep_cumulative.assign(d, std::vector<double>(npts, 0.0));
    out.total[0] = y0;

    double y = y0;
    for (size_t i = 0; i + 1 < npts; ++i) {
        const double h = out.grid[i + 1] - out.grid[i];
        double force1 = 0.0, forcem = 0.0, force4 = 0.0;
        for (size_t k = 0; k < d; ++k) {
            force1 += coeffs[static_cast<Eigen::Index>(k)] * at_node[k][i];
            forcem += coeffs[static_cast<Eigen::Index>(k)] * at_mid[k][i];
            force4 += coeffs[static_cast<Eigen::Index>(k)] * at_node[k][i + 1];
        }
        const double s1 = rate * y;
        const double k1 = s1 + force1;
        const double s2 = rate * (y + h / 2.0 * k1);
        const double k2 = s2 + forcem;
        const double s3 = rate * (y + h / 2.0 * k2);
        const double k3 = s3 + forcem;
        const double s4 = rate * (y + h * k3);
        const double k4 = s4 + force4;

        const double dself = h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
        double dtotal = dself;
        out.self_cumulative[i + 1] = out.self_cumulative[i] + dself;
        for (size_t k = 0; k < d; ++k) {
            const double c = coeffs[static_cast<Eigen::Index>(k)];
            const double ddep =
                h / 6.0 * c * (at_node[k][i] + 4.0 * at_mid[k][i] + at_node[k][i + 1]);
            out.dep_cumulative[k][i + 1] = out.dep_cumulative[k][i] + ddep;
            dtotal += ddep;
        }
        y += dtotal;
        if (!std::isfinite(y)) throw IntegrationError("qdODE trajectory diverged", out.grid[i + 1]);
        out.total[i + 1] = y;
    }
    return out;
}

enum class FitMode { LeastSquares, Gaussian };

struct QdOdeOptions {
    int lop_order = 4;
    FitMode mode = FitMode::LeastSquares;
    double max_step = 0.0;  // <= 0: domain width / 200
    QuasiNewtonOptions optimizer;
};

/// One target's fitted quasi-dynamic ODE: self rate, signed regulator
/// coefficients, and the effect decomposition over the dense index grid.
struct QdOdeFit {
    std::string target;
    double self_rate = 0.0;
    std::vector<std::pair<std::string, double>> regulator_coeffs;
    std::vector<LegendreCurve> regulator_curves;  // parallel to regulator_coeffs
    std::vector<double> grid;
    std::vector<double> fitted_trajectory;
    std::vector<double> independent_curve;                // starts at the initial value
    std::vector<std::vector<double>> dependent_curves;    // start at 0
    std::vector<double> sample_nu;   // unique ascending sample positions
    std::vector<double> sample_obs;  // duplicate-index observations averaged
    double sse = 0.0;
};

namespace detail {

struct PreparedTarget {
    std::vector<double> nu;   // unique ascending
    std::vector<double> obs;  // averaged over duplicate nu
};

inline PreparedTarget prepare_target(const ScaledIndex& scaled, const Eigen::VectorXd& row) {
    PreparedTarget p;
    for (Eigen::Index pos : scaled.order) {
        p.nu.push_back(scaled.scaled[pos]);
        p.obs.push_back(row[pos]);
    }
    // collapse duplicate index values by averaging their observations
    std::vector<double> nu_u, obs_u;
    size_t i = 0;
    while (i < p.nu.size()) {
        size_t j = i;
        double acc = 0.0;
        while (j < p.nu.size() && p.nu[j] == p.nu[i]) acc += p.obs[j++];
        nu_u.push_back(p.nu[i]);
        obs_u.push_back(acc / static_cast<double>(j - i));
        i = j;
    }
    p.nu = std::move(nu_u);
    p.obs = std::move(obs_u);
    if (p.nu.size() < 2) throw ValidationError("need at least 2 distinct index values to fit");
    return p;
}

}  // namespace detail

/// Objective for one target: integrate the linear qdODE from the observed
/// initial value, compare at the sample positions. LS returns the SSE;
/// Gaussian returns the negative log-likelihood with the error variance
/// profiled out (a monotone transform of the SSE, so both share a minimizer).
/// Integration failures surface as +infinity so optimizers reject the step.
inline double qdode_objective(const Eigen::VectorXd& params, const std::vector<double>& sample_nu,
                              const std::vector<double>& sample_obs,
                              const std::vector<LegendreCurve>& forcings, FitMode mode,
                              double max_step = 0.0) {
    if (params.size() != static_cast<Eigen::Index>(forcings.size() + 1))
        throw ValidationError("parameter vector must hold the self rate plus one "
                              "coefficient per regulator");
    try {
        DecomposedTrajectory traj =
            integrate_decomposed(params[0], params.tail(params.size() - 1), forcings,
                                 sample_obs.front(), sample_nu, max_step);
        double sse = 0.0;
        size_t grid_pos = 0;
        for (size_t i = 0; i < sample_nu.size(); ++i) {
            while (grid_pos < traj.grid.size() && traj.grid[grid_pos] != sample_nu[i]) ++grid_pos;
            if (grid_pos == traj.grid.size())
                throw IntegrationError("sample position missing from dense grid", sample_nu[i]);
            const double r = sample_obs[i] - traj.total[grid_pos];
            sse += r * r;
        }
        if (mode == FitMode::LeastSquares) return sse;
        const auto n = static_cast<double>(sample_nu.size());
        return 0.5 * n * (std::log(2.0 * M_PI * std::max(sse, 1e-300) / n) + 1.0);
    } catch (const IntegrationError&) {
        return std::numeric_limits<double>::infinity();
    }
}

/// Re-integrates a fit and returns (independent curve, dependent curves) on
/// the dense grid; their pointwise sum reproduces the fitted trajectory.
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> decompose_effects(
    const QdOdeFit& fit, double max_step = 0.0) {
    Eigen::VectorXd coeffs(static_cast<Eigen::Index>(fit.regulator_coeffs.size()));
    for (size_t k = 0; k < fit.regulator_coeffs.size(); ++k)
        coeffs[static_cast<Eigen::Index>(k)] = fit.regulator_coeffs[k].second;
    DecomposedTrajectory traj = integrate_decomposed(
        fit.self_rate, coeffs, fit.regulator_curves, fit.sample_obs.front(), fit.sample_nu,
        max_step);
    std::vector<double> independent(traj.total.size());
    for (size_t i = 0; i < traj.total.size(); ++i)
        independent[i] = fit.sample_obs.front() + traj.self_cumulative[i];
    return {std::move(independent), std::move(traj.dep_cumulative)};
}

/// Smooths each regulator with the Legendre basis, fits (self rate, regulator
/// coefficients) from zero initialization, and populates the decomposed
/// curves over the dense grid.
inline QdOdeFit fit_qdode(const ExpressionMatrix& matrix, const ScaledIndex& scaled,
                          const std::string& target, const RegulatorSet& regulators,
                          const QdOdeOptions& opts = {}) {
    const Eigen::Index t = matrix.variable_position(target);
    detail::PreparedTarget prepared = detail::prepare_target(scaled, matrix.values.row(t));

    QdOdeFit fit;
    fit.target = target;
    fit.sample_nu = prepared.nu;
    fit.sample_obs = prepared.obs;
    for (const auto& [rid, coef] : regulators.regulators) {
        const Eigen::Index r = matrix.variable_position(rid);
        (void)coef;  // selection-stage coefficient; the ODE refits its own
        fit.regulator_coeffs.emplace_back(rid, 0.0);
        fit.regulator_curves.push_back(
            lop_smooth(scaled, matrix.values.row(r).transpose(), opts.lop_order));
    }

    auto objective = [&](const Eigen::VectorXd& params) {
        return qdode_objective(params, fit.sample_nu, fit.sample_obs, fit.regulator_curves,
                               opts.mode, opts.max_step);
    };
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1 + static_cast<Eigen::Index>(
                                                       fit.regulator_curves.size()));
    OptResult opt = minimize_quasi_newton(objective, x0, opts.optimizer);

    fit.self_rate = opt.x[0];
    for (size_t k = 0; k < fit.regulator_coeffs.size(); ++k)
        fit.regulator_coeffs[k].second = opt.x[static_cast<Eigen::Index>(k) + 1];

    Eigen::VectorXd coeffs = opt.x.tail(opt.x.size() - 1);
    DecomposedTrajectory traj =
        integrate_decomposed(fit.self_rate, coeffs, fit.regulator_curves,
                             fit.sample_obs.front(), fit.sample_nu, opts.max_step);
    fit.grid = traj.grid;
    fit.fitted_trajectory = traj.total;
    fit.independent_curve.resize(traj.total.size());
    for (size_t i = 0; i < traj.total.size(); ++i)
        fit.independent_curve[i] = fit.sample_obs.front() + traj.self_cumulative[i];
    fit.dependent_curves = std::move(traj.dep_cumulative);
    fit.sse = qdode_objective(opt.x, fit.sample_nu, fit.sample_obs, fit.regulator_curves,
                              FitMode::LeastSquares, opts.max_step);
    return fit;
}

}  // namespace idop
