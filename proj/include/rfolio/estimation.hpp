#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>

#include "rfolio/market_data.hpp"

namespace rfolio {

// Point estimates of the return distribution.  The covariance uses the
// maximum-likelihood divisor n, not n-1.
struct MomentEstimates {
    Eigen::VectorXd mu_hat;
    Eigen::MatrixXd sigma_hat;
    std::size_t n = 0;
    Eigen::VectorXd per_asset_std;
};

// Per-asset confidence radii for the expected return: |mu_i - mu_hat_i| <= delta_i.
struct BoxSet {
    Eigen::VectorXd delta;
    double alpha = 0.0;
};

// Mahalanobis ball (mu - mu_hat)' sigma_mu^-1 (mu - mu_hat) <= delta_sq.
struct EllipsoidSet {
    double delta_sq = 0.0;
    Eigen::MatrixXd sigma_mu;
    double alpha = 0.0;
};

// Independent interval bounds on the mean vector and on each covariance entry,
// estimated by the nonparametric bootstrap.  The worst case consumes mu_lo and
// sigma_hi; the other two bounds are kept for diagnostics.
struct SeparableSet {
    Eigen::VectorXd mu_lo;
    Eigen::VectorXd mu_hi;
    Eigen::MatrixXd sigma_lo;
    Eigen::MatrixXd sigma_hi;
    double alpha = 0.0;
    int beta = 0;
    std::uint64_t seed = 0;
};

MomentEstimates estimate_moments(const ReturnMatrix& returns);

// Inverse standard normal CDF (absolute error below 1e-9).
double normal_quantile(double p);

// Inverse chi-square CDF with df degrees of freedom (relative error below 1e-8).
double chi_square_quantile(int df, double p);

// delta_i = sigma_i * z_{1 - alpha/2} / sqrt(n) for a 100(1-alpha)% interval.
BoxSet calibrate_box(const MomentEstimates& moments, double alpha);

// delta_sq from the chi-square quantile with N degrees of freedom;
// sigma_mu = sigma_hat / n (covariance of the sample-mean estimator).
EllipsoidSet calibrate_ellipsoid(const MomentEstimates& moments, double alpha);

// beta resamples of the n return rows with replacement; elementwise empirical
// alpha/2 and 1-alpha/2 quantiles (nearest-rank) of the resampled moments.
// sigma_hi is symmetrized and repaired to positive semidefinite.  Each
// resample's random stream is derived from (seed, resample index), so the
// result is identical for any thread count (threads == 0 picks one per core).
SeparableSet bootstrap_separable(const ReturnMatrix& returns, double alpha, int beta,
                                 std::uint64_t seed, int threads = 0);

// 1-based nearest-rank order statistic for the q-quantile of beta values.
int bootstrap_rank(double q, int beta);

// Eigen-clip PSD repair: eigenvalues below floor_eigenvalue are raised to it.
// Already-compliant input is returned unchanged.
Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& matrix, double floor_eigenvalue = 0.0);

// JSON layout: vectors and matrices as row-major nested arrays, so a solve can
// be re-run from a saved calibration.
void to_json(nlohmann::json& j, const MomentEstimates& m);
void from_json(const nlohmann::json& j, MomentEstimates& m);
void to_json(nlohmann::json& j, const BoxSet& s);
void from_json(const nlohmann::json& j, BoxSet& s);
void to_json(nlohmann::json& j, const EllipsoidSet& s);
void from_json(const nlohmann::json& j, EllipsoidSet& s);
void to_json(nlohmann::json& j, const SeparableSet& s);
void from_json(const nlohmann::json& j, SeparableSet& s);

}  // namespace rfolio
