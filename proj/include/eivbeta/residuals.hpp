#pragma once

// Standardized weighted residuals of a fitted beta regression
//
//   r_t = (y*_t - mu*_t) / sqrt(v_t (1 - h*_tt))
//
// with y* = logit(y), mu*_t = psi(mu_t phi_t) - psi((1 - mu_t) phi_t),
// v_t = psi'(mu_t phi_t) + psi'((1 - mu_t) phi_t), and h*_tt the diagonal of
//
//   H* = (M Phi)^{1/2} W (W' Phi M W)^{-1} W' (Phi M)^{1/2},
//   m_t = phi_t v_t / g'(mu_t)^2,   W rows (z_t', w_t).

#include <cstdint>
#include <vector>

#include "eivbeta/estimators.hpp"
#include "eivbeta/model.hpp"

namespace eivbeta {

// What stands in for x when mu_t and phi_t are evaluated at the fit.
//   calibrated: E[x | w] at the fit's nuisance estimate (falls back to w for
//               fits without one, i.e. the naive fit)
//   surrogate:  w itself
enum class CovariatePlugIn { calibrated, surrogate };

struct ResidualReport {
  Eigen::VectorXd r;
  Eigen::VectorXd h_star_diag;
  Eigen::VectorXd x_predicted;
};

struct Envelope {
  Eigen::VectorXd lower;  // per order statistic
  Eigen::VectorXd upper;
  double level = 0.95;
  int n_sim = 0;  // replicates that entered the bounds
};

Eigen::VectorXd plug_in_covariate(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                                  CovariatePlugIn plug_in = CovariatePlugIn::calibrated);

// Full n x n matrix H*. Throws RankDeficiencyError naming the columns of W
// that make W' Phi M W singular.
Eigen::MatrixXd weighted_hat_matrix(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                                    const ModelSpec& spec, CovariatePlugIn plug_in = CovariatePlugIn::calibrated);

ResidualReport weighted_residuals(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                                  const ModelSpec& spec, CovariatePlugIn plug_in = CovariatePlugIn::calibrated);

// Response vector of envelope replicate `index`, drawn from the fitted model
// on stream (seed, index).
Eigen::VectorXd envelope_replicate_response(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                                            const ModelSpec& spec, std::uint64_t seed, int index,
                                            CovariatePlugIn plug_in = CovariatePlugIn::calibrated);

// Each replicate is refitted with the fit's own method (refit = false keeps
// the supplied parameters, which is the matching reference when the observed
// residuals are themselves computed at known parameters). Bounds are type-7
// quantiles at (1 -/+ level) / 2 of the sorted residuals, so level = 1 gives
// min and max. Requires n_sim >= 19 and 0 < level <= 1.
Envelope simulated_envelope(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                            const ModelSpec& spec, int n_sim = 100, double level = 0.95, std::uint64_t seed = 1,
                            const FitOptions& refit_options = {},
                            CovariatePlugIn plug_in = CovariatePlugIn::calibrated, bool refit = true);

// Type-7 sample quantile of already sorted values.
double sorted_quantile(const std::vector<double>& sorted, double p);

}  // namespace eivbeta
