#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "idop/errors.hpp"
#include "idop/ingest.hpp"
#include "idop/optim.hpp"

namespace idop {

/// First-order structured antedependence covariance: entry (s,t) is
/// sigma2 * phi^|t-s| * (1 - phi^(2 min(s,t)+2)) / (1 - phi^2), 0-based.
/// phi = 0 reduces to sigma2 * I.
struct Sad1Covariance {
    double phi = 0.0;
    double sigma2 = 1.0;
    Eigen::Index n = 0;
};

inline Eigen::MatrixXd sad1_covariance(double phi, double sigma2, Eigen::Index n) {
    if (!(std::abs(phi) < 1.0)) throw ValidationError("SAD(1) requires |phi| < 1");
    if (!(sigma2 > 0.0)) throw ValidationError("SAD(1) requires sigma2 > 0");
    if (n < 1) throw ValidationError("SAD(1) dimension must be positive");

    Eigen::MatrixXd cov(n, n);
    const double denom = 1.0 - phi * phi;
    auto ipow = [](double base, Eigen::Index e) {
        double r = 1.0;
        for (Eigen::Index i = 0; i < e; ++i) r *= base;
        return r;
    };
    for (Eigen::Index s = 0; s < n; ++s)
        for (Eigen::Index t = s; t < n; ++t) {
            const double v = sigma2 * ipow(phi, t - s) * (1.0 - ipow(phi, 2 * s + 2)) / denom;
            cov(s, t) = v;
            cov(t, s) = v;
        }
    return cov;
}

/// Mixture of power-law mean curves over the sorted expression index with a
/// shared SAD(1) covariance, fitted by EM.
struct ClusterModel {
    int L = 0;
    Eigen::VectorXd proportions;                  // length L, simplex
    std::vector<std::pair<double, double>> mean_params;  // (alpha_l, beta_l)
    Sad1Covariance covariance;
    Eigen::MatrixXd posteriors;                   // m x L, rows sum to 1
    std::vector<int> assignments;                 // argmax posterior per variable
    double log_likelihood = -std::numeric_limits<double>::infinity();
    std::vector<double> loglik_trace;             // per EM iteration
    std::vector<std::string> warnings;
};

struct EmOptions {
    int max_iter = 200;
    double tol = 1e-6;
    std::uint64_t seed = 1;
    int simplex_iter_per_param = 60;  // M-step budget scales with dimension
};

/// Lloyd's algorithm on matrix rows. Deterministic for a given seed; empty
/// clusters are reseeded from the point farthest from its centroid.
inline std::vector<int> kmeans_init(const Eigen::MatrixXd& rows, int L, std::uint64_t seed) {
    const Eigen::Index m = rows.rows();
    if (L < 1) throw ValidationError("cluster count must be positive");
    if (static_cast<Eigen::Index>(L) > m)
        throw ValidationError("cannot form " + std::to_string(L) + " clusters from " +
                              std::to_string(m) + " rows");

    std::vector<int> labels(static_cast<size_t>(m), 0);
    if (L == 1) return labels;

    // Farthest-point seeding: first center drawn with the seed, the rest
    // placed greedily at the row farthest from its nearest center.
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd centers(L, rows.cols());
    centers.row(0) = rows.row(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(m)));
    Eigen::VectorXd nearest = (rows.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int l = 1; l < L; ++l) {
        Eigen::Index far_j;
        nearest.maxCoeff(&far_j);
        centers.row(l) = rows.row(far_j);
        nearest = nearest.cwiseMin((rows.rowwise() - centers.row(l)).rowwise().squaredNorm());
    }

    for (int pass = 0; pass < 100; ++pass) {
        bool changed = false;
        for (Eigen::Index j = 0; j < m; ++j) {
            int best = 0;
            double best_d = (rows.row(j) - centers.row(0)).squaredNorm();
            for (int l = 1; l < L; ++l) {
                const double d = (rows.row(j) - centers.row(l)).squaredNorm();
                if (d < best_d) { best_d = d; best = l; }
            }
            if (labels[static_cast<size_t>(j)] != best) {
                labels[static_cast<size_t>(j)] = best;
                changed = true;
            }
        }
        std::vector<Eigen::Index> counts(static_cast<size_t>(L), 0);
        centers.setZero();
        for (Eigen::Index j = 0; j < m; ++j) {
            centers.row(labels[static_cast<size_t>(j)]) += rows.row(j);
            ++counts[static_cast<size_t>(labels[static_cast<size_t>(j)])];
        }
        for (int l = 0; l < L; ++l) {
            if (counts[static_cast<size_t>(l)] > 0) {
                centers.row(l) /= static_cast<double>(counts[static_cast<size_t>(l)]);
            } else {
                // reseed from the row farthest from its own centroid
                double far_d = -1.0;
                Eigen::Index far_j = 0;
                for (Eigen::Index j = 0; j < m; ++j) {
                    const double d =
                        (rows.row(j) - centers.row(labels[static_cast<size_t>(j)])).squaredNorm();
                    if (d > far_d) { far_d = d; far_j = j; }
                }
                centers.row(l) = rows.row(far_j);
                labels[static_cast<size_t>(far_j)] = l;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return labels;
}

namespace detail {

/// Log-density of an n-dim Gaussian via the Cholesky factor of Sigma.
inline double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                              const Eigen::LLT<Eigen::MatrixXd>& llt, double log_det) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd d = x - mu;
    const double quad = llt.matrixL().solve(d).squaredNorm();
    return -0.5 * (static_cast<double>(n) * std::log(2.0 * M_PI) + log_det + quad);
}

struct EmData {
    Eigen::MatrixXd curves;   // m x n, columns in ascending-index order
    Eigen::VectorXd e_sorted; // ascending raw index
};

inline EmData sorted_curves(const ExpressionMatrix& matrix) {
    const ScaledIndex scaled = scale_index(matrix.index);
    EmData d;
    const Eigen::Index m = matrix.variables(), n = matrix.samples();
    d.curves.resize(m, n);
    d.e_sorted.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d.curves.col(i) = matrix.values.col(scaled.order[static_cast<size_t>(i)]);
        d.e_sorted[i] = matrix.index[scaled.order[static_cast<size_t>(i)]];
    }
    return d;
}

/// Unpacks the M-step parameter vector: (alpha_l, beta_l) per module then
/// (phi, sigma2). Returns false when outside the valid domain.
struct MixtureParams {
    std::vector<std::pair<double, double>> mean_params;
    double phi, sigma2;
};

inline bool unpack(const Eigen::VectorXd& theta, int L, MixtureParams& p) {
    p.mean_params.resize(static_cast<size_t>(L));
    for (int l = 0; l < L; ++l)
        p.mean_params[static_cast<size_t>(l)] = {theta[2 * l], theta[2 * l + 1]};
    p.phi = theta[2 * L];
    p.sigma2 = theta[2 * L + 1];
    return std::abs(p.phi) < 1.0 && p.sigma2 > 0.0;
}

inline Eigen::VectorXd power_mean(const Eigen::VectorXd& e, double alpha, double beta) {
    return alpha * e.array().pow(beta);
}

}  // namespace detail

/// E-step: posterior responsibilities from per-component log-densities and
/// mixing proportions, computed with log-sum-exp. Rows sum to 1.
inline Eigen::MatrixXd mixture_posteriors(const Eigen::MatrixXd& log_dens,
                                          const Eigen::VectorXd& proportions) {
    const Eigen::Index m = log_dens.rows(), L = log_dens.cols();
    if (proportions.size() != L) throw ValidationError("proportions/density shape mismatch");
    Eigen::MatrixXd post(m, L);
    for (Eigen::Index j = 0; j < m; ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index l = 0; l < L; ++l)
            mx = std::max(mx, std::log(std::max(proportions[l], 1e-300)) + log_dens(j, l));
        double denom = 0.0;
        for (Eigen::Index l = 0; l < L; ++l) {
            const double w =
                std::exp(std::log(std::max(proportions[l], 1e-300)) + log_dens(j, l) - mx);
            post(j, l) = w;
            denom += w;
        }
        post.row(j) /= denom;
    }
    return post;
}

/// EM for the functional mixture. The E-step computes posteriors from the
/// current component densities; the M-step updates proportions in closed form
/// and improves (means, covariance) with Nelder-Mead started at the previous
/// iterate, which keeps the observed log-likelihood non-decreasing.
inline ClusterModel em_functional_cluster(const ExpressionMatrix& matrix, int L,
                                          const EmOptions& opts = {}) {
    const Eigen::Index m = matrix.variables(), n = matrix.samples();
    if (L < 1) throw ValidationError("module count must be >= 1");
    detail::EmData data = detail::sorted_curves(matrix);

    ClusterModel model;
    model.L = L;

    // init from k-means
    std::vector<int> labels = kmeans_init(data.curves, L, opts.seed);
    Eigen::VectorXd theta(2 * L + 2);
    double pooled_var = 0.0;
    {
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(L);
        for (int l = 0; l < L; ++l) {
            Eigen::VectorXd mean_curve = Eigen::VectorXd::Zero(n);
            int cnt = 0;
            for (Eigen::Index j = 0; j < m; ++j)
                if (labels[static_cast<size_t>(j)] == l) {
                    mean_curve += data.curves.row(j).transpose();
                    ++cnt;
                }
            counts[l] = cnt;
            if (cnt > 0) mean_curve /= static_cast<double>(cnt);
            double alpha = std::max(1e-6, mean_curve.mean());
            double beta = 0.0;
            if ((data.e_sorted.array() > 0.0).all() && (mean_curve.array() > 0.0).all()) {
                // log-log slope as a starting exponent
                Eigen::VectorXd lx = data.e_sorted.array().log(), ly = mean_curve.array().log();
                const double mx = lx.mean(), my = ly.mean();
                const double sxx = (lx.array() - mx).square().sum();
                if (sxx > 0.0) {
                    beta = ((lx.array() - mx) * (ly.array() - my)).sum() / sxx;
                    alpha = std::exp(my - beta * mx);
                }
            }
            theta[2 * l] = alpha;
            theta[2 * l + 1] = beta;
            for (Eigen::Index j = 0; j < m; ++j)
                if (labels[static_cast<size_t>(j)] == l)
                    pooled_var += (data.curves.row(j).transpose() -
                                   detail::power_mean(data.e_sorted, alpha, beta)).squaredNorm();
        }
        pooled_var /= static_cast<double>(m * n);
        theta[2 * L] = 0.1;
        theta[2 * L + 1] = std::max(pooled_var, 1e-6);
        model.proportions = (counts.array() / static_cast<double>(m)).matrix();
    }

    detail::MixtureParams params;
    detail::unpack(theta, L, params);

    // log component densities for the current params; returns false if the
    // covariance is unusable even after projection
    Eigen::MatrixXd log_dens(m, L);
    auto compute_log_densities = [&](const detail::MixtureParams& p, Eigen::MatrixXd& out) {
        Eigen::MatrixXd cov = sad1_covariance(p.phi, p.sigma2, n);
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) return false;
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            log_det += 2.0 * std::log(llt.matrixL()(i, i));
        for (int l = 0; l < L; ++l) {
            const auto& [alpha, beta] = p.mean_params[static_cast<size_t>(l)];
            Eigen::VectorXd mu = detail::power_mean(data.e_sorted, alpha, beta);
            if (!mu.allFinite()) return false;
            for (Eigen::Index j = 0; j < m; ++j)
                out(j, l) = detail::gaussian_logpdf(data.curves.row(j).transpose(), mu, llt,
                                                    log_det);
        }
        return out.allFinite();
    };

    if (!compute_log_densities(params, log_dens))
        throw NumericError("initial mixture parameters give a degenerate covariance");

    auto observed_loglik = [&](const Eigen::VectorXd& pi, const Eigen::MatrixXd& ld) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int l = 0; l < L; ++l)
                mx = std::max(mx, std::log(std::max(pi[l], 1e-300)) + ld(j, l));
            double acc = 0.0;
            for (int l = 0; l < L; ++l)
                acc += std::exp(std::log(std::max(pi[l], 1e-300)) + ld(j, l) - mx);
            total += mx + std::log(acc);
        }
        return total;
    };

    model.posteriors.resize(m, L);
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        model.posteriors = mixture_posteriors(log_dens, model.proportions);

        const double ll = observed_loglik(model.proportions, log_dens);
        model.loglik_trace.push_back(ll);
        model.log_likelihood = ll;
        if (ll - prev_ll < opts.tol && iter > 0) break;
        prev_ll = ll;

        // M-step: proportions in closed form
        model.proportions = model.posteriors.colwise().mean().transpose();

        // M-step: means + covariance by simplex on the expected complete-data
        // negative log-likelihood (theta-dependent part only)
        Eigen::MatrixXd post = model.posteriors;
        auto q_neg = [&](const Eigen::VectorXd& th) {
            detail::MixtureParams p;
            if (!detail::unpack(th, L, p)) return std::numeric_limits<double>::infinity();
            Eigen::MatrixXd ld(m, L);
            if (!compute_log_densities(p, ld)) return std::numeric_limits<double>::infinity();
            return -(post.array() * ld.array()).sum();
        };
        SimplexOptions sopts;
        sopts.max_iter = opts.simplex_iter_per_param * static_cast<int>(theta.size());
        sopts.f_tol = 1e-10;
        sopts.initial_scale = 0.05;
        OptResult step = minimize_simplex(q_neg, theta, sopts);
        theta = step.x;

        if (!detail::unpack(theta, L, params) || params.sigma2 < 1e-8 ||
            std::abs(params.phi) > 0.99) {
            params.phi = std::clamp(params.phi, -0.99, 0.99);
            params.sigma2 = std::max(params.sigma2, 1e-8);
            theta[2 * L] = params.phi;
            theta[2 * L + 1] = params.sigma2;
            model.warnings.push_back("covariance parameters projected back to the valid domain");
        }
        if (!compute_log_densities(params, log_dens))
            throw NumericError("EM produced a degenerate covariance");
    }

    model.mean_params = params.mean_params;
    model.covariance = {params.phi, params.sigma2, n};
    model.assignments.resize(static_cast<size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::Index arg;
        model.posteriors.row(j).maxCoeff(&arg);
        model.assignments[static_cast<size_t>(j)] = static_cast<int>(arg);
    }
    return model;
}

inline double aic(double k, double log_likelihood) { return 2.0 * k - 2.0 * log_likelihood; }
inline double bic(double k, double log_likelihood, double n_obs) {
    return k * std::log(n_obs) - 2.0 * log_likelihood;
}

enum class Criterion { AIC, BIC };

struct ModuleCountResult {
    int best_L = 1;
    std::vector<double> scores;          // indexed L-1, NaN where the fit failed
    std::vector<double> log_likelihoods;
    std::vector<std::string> errors;
    ClusterModel best_model;
};

/// Fits L = 1..L_max and scores each with AIC or BIC using
/// k = 2L (means) + 2 (covariance) + (L-1) (proportions).
inline ModuleCountResult select_module_count(const ExpressionMatrix& matrix, int L_max,
                                             Criterion criterion, const EmOptions& opts = {}) {
    if (L_max < 1) throw ValidationError("L_max must be >= 1");
    ModuleCountResult res;
    res.scores.assign(static_cast<size_t>(L_max), std::numeric_limits<double>::quiet_NaN());
    res.log_likelihoods.assign(static_cast<size_t>(L_max),
                               std::numeric_limits<double>::quiet_NaN());
    res.errors.assign(static_cast<size_t>(L_max), "");
    double best_score = std::numeric_limits<double>::infinity();
    bool any = false;
    for (int L = 1; L <= L_max; ++L) {
        try {
            ClusterModel model = em_functional_cluster(matrix, L, opts);
            const double k = 2.0 * L + 2.0 + (L - 1.0);
            // BIC sample size: total scalar observations m*n, the convention
            // for longitudinal likelihoods that factor over samples.
            const double score = criterion == Criterion::AIC
                                     ? aic(k, model.log_likelihood)
                                     : bic(k, model.log_likelihood,
                                           static_cast<double>(matrix.samples() *
                                                               matrix.variables()));
            res.scores[static_cast<size_t>(L - 1)] = score;
            res.log_likelihoods[static_cast<size_t>(L - 1)] = model.log_likelihood;
            if (!any || score < best_score) {
                best_score = score;
                res.best_L = L;
                res.best_model = std::move(model);
                any = true;
            }
        } catch (const std::exception& e) {
            res.errors[static_cast<size_t>(L - 1)] = e.what();
        }
    }
    if (!any) throw NumericError("every module count failed to fit");
    return res;
}

/// Sums expression rows within each module; empty modules produce a zero row
/// and a warning.
inline ExpressionMatrix module_expression(const ExpressionMatrix& matrix,
                                          const std::vector<int>& assignments,
                                          std::vector<std::string>* warnings = nullptr) {
    if (assignments.size() != static_cast<size_t>(matrix.variables()))
        throw ValidationError("assignments must cover every variable");
    int L = 0;
    for (int a : assignments) {
        if (a < 0) throw ValidationError("negative module label");
        L = std::max(L, a + 1);
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(L, matrix.samples());
    std::vector<int> counts(static_cast<size_t>(L), 0);
    for (Eigen::Index j = 0; j < matrix.variables(); ++j) {
        sums.row(assignments[static_cast<size_t>(j)]) += matrix.values.row(j);
        ++counts[static_cast<size_t>(assignments[static_cast<size_t>(j)])];
    }
    std::vector<std::string> ids;
    for (int l = 0; l < L; ++l) {
        ids.push_back("module_" + std::to_string(l));
        if (counts[static_cast<size_t>(l)] == 0 && warnings)
            warnings->push_back("module " + std::to_string(l) + " is empty");
    }
    ExpressionMatrix out;
    out.variable_ids = std::move(ids);
    out.sample_ids = matrix.sample_ids;
    out.values = std::move(sums);
    out.index = expression_index(out.values);
    return out;
}

}  // namespace idop
