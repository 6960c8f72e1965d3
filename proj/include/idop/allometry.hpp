#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "idop/errors.hpp"

namespace idop {

/// Power-law relation y = alpha * x^beta fitted by ordinary least squares in
/// log-log space.
struct PowerLawFit {
    double alpha = 0.0;
    double beta = 0.0;
    double r_squared = 0.0;
    Eigen::Index n_used = 0;
};

/// Fits log y = log alpha + beta log x by OLS. Points with y <= 0 are dropped
/// (no pseudo-count); every x must be strictly positive.
inline PowerLawFit fit_power_law(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw ValidationError("x and y must have equal length");
    if ((x.array() <= 0.0).any()) throw ValidationError("power-law fit requires x > 0");

    std::vector<double> lx, ly;
    lx.reserve(static_cast<size_t>(x.size()));
    ly.reserve(static_cast<size_t>(y.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    const auto n = static_cast<Eigen::Index>(lx.size());
    if (n < 2) throw ValidationError("power-law fit needs at least 2 points with y > 0");

    Eigen::Map<const Eigen::VectorXd> vx(lx.data(), n), vy(ly.data(), n);
    const double mx = vx.mean(), my = vy.mean();
    const double sxx = (vx.array() - mx).square().sum();
    const double sxy = ((vx.array() - mx) * (vy.array() - my)).sum();
    if (sxx <= 0.0) throw ValidationError("power-law fit needs non-constant x");

    PowerLawFit fit;
    fit.beta = sxy / sxx;
    fit.alpha = std::exp(my - fit.beta * mx);
    fit.n_used = n;

    const double sst = (vy.array() - my).square().sum();
    const double sse = (vy.array() - (std::log(fit.alpha) + fit.beta * vx.array())).square().sum();
    fit.r_squared = sst > 0.0 ? 1.0 - sse / sst : 1.0;
    fit.r_squared = std::min(1.0, std::max(0.0, fit.r_squared));
    return fit;
}

}  // namespace idop
