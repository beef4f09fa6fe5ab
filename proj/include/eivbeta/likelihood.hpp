#pragma once

// Log-likelihood variants of the errors-in-variables beta regression model.
//
// The joint log-likelihood splits into the surrogate marginal
//   l1_t(delta) = log N(w_t; tau0 + tau1 mu_x, tau1^2 s2_x + s2_e)
// and the conditional part
//   l2_t = log int f(y_t | x) N(x; mu_{x|w}, s2_{x|w}) dx,
// which is approximated by Gauss-Hermite quadrature on the nodes
//   x*_tq = mu_{x|w} + sqrt(2 s2_{x|w}) eta_q
// and combined with log-sum-exp.
//
// The functions in namespace eivbeta run the observation loop with OpenMP
// (per-observation terms are written to their own slot and summed in index
// order, so results do not depend on the thread count). Namespace
// eivbeta::serial holds the plain reference implementation used by the tests
// and the benchmark.

#include <span>
#include <vector>

#include "eivbeta/model.hpp"
#include "eivbeta/quadrature.hpp"

namespace eivbeta {

struct LoglikValue {
  double value = 0.0;
  std::vector<double> terms;  // per observation; value == sum(terms)
};

// log Beta(y; mu, phi) in the mean/precision parameterisation.
// Throws DomainError for y outside (0,1), mu outside (0,1) or phi <= 0.
double beta_log_density(double y, double mu, double phi);

// Sum of l1_t(delta). Throws DegenerateModelError for zero total variance.
LoglikValue loglik_w_marginal(const Dataset& data, const DeltaParams& delta, const MeasurementSpec& meas);

// Approximate log-likelihood l_a(theta, delta); terms are l1_t + l2_t.
LoglikValue loglik_approx(const Dataset& data, const ThetaParams& theta, const DeltaParams& delta,
                          const MeasurementSpec& meas, const HermiteRule& rule, const ModelSpec& spec);

// Pseudo-log-likelihood l_p(theta; delta_hat): l_a with the nuisance frozen.
LoglikValue loglik_pseudo(const Dataset& data, const ThetaParams& theta, const DeltaParams& delta_hat,
                          const MeasurementSpec& meas, const HermiteRule& rule, const ModelSpec& spec);

// Beta log-likelihood with x replaced by the supplied covariate values
// (regression calibration when x_tilde = E[x | w], naive when x_tilde = w).
LoglikValue loglik_calibration(const Dataset& data, const ThetaParams& theta, std::span<const double> x_tilde,
                               const ModelSpec& spec);

LoglikValue loglik_naive(const Dataset& data, const ThetaParams& theta, const ModelSpec& spec);

namespace serial {

LoglikValue loglik_approx(const Dataset& data, const ThetaParams& theta, const DeltaParams& delta,
                          const MeasurementSpec& meas, const HermiteRule& rule, const ModelSpec& spec);
LoglikValue loglik_calibration(const Dataset& data, const ThetaParams& theta, std::span<const double> x_tilde,
                               const ModelSpec& spec);

}  // namespace serial
}  // namespace eivbeta
