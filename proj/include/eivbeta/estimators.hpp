#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eivbeta/model.hpp"
#include "eivbeta/optim.hpp"
#include "eivbeta/quadrature.hpp"

namespace eivbeta {

enum class Method { naive, aml, mpl, rc };

std::string_view method_name(Method method);
Method method_from_name(std::string_view name);

enum class CovarianceSource { observed_information, sandwich, parametric_bootstrap };
std::string_view covariance_source_name(CovarianceSource source);

// Which matrix plays I_dd in the pseudo-likelihood sandwich.
//   reduced: information of the surrogate marginal l_r (what the two-step
//            expansion calls for; default)
//   pseudo:  delta-block of the observed information of l_p, as printed in
//            the published formula
enum class NuisanceInformation { reduced, pseudo };

struct FitResult {
  Method method = Method::naive;
  ThetaParams theta;
  std::optional<DeltaParams> delta;
  // Reported parameters: theta in packed order, followed by (mu_x, sigma2_x)
  // for the joint maximum likelihood fit.
  std::vector<std::string> names;
  Eigen::VectorXd estimates;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd se;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  std::optional<int> n_boot;
  CovarianceSource covariance_source = CovarianceSource::observed_information;
  std::string message;
};

struct FitOptions {
  OptimOptions optim{};
  int quad_points = 50;
  int n_boot = 200;
  std::uint64_t seed = 1;
  NuisanceInformation nuisance_information = NuisanceInformation::reduced;
  // Skip standard errors (point estimates only).
  bool point_only = false;
};

// Ordinary beta regression with the supplied values standing in for x.
FitResult fit_beta_regression(const Dataset& data, std::span<const double> x, const ModelSpec& spec,
                              const FitOptions& options = {});

// Treats w as the true covariate in both submodels.
FitResult fit_naive(const Dataset& data, const ModelSpec& spec, const FitOptions& options = {});

// Regression calibration: x replaced by E[x | w] with (mu_x, s2_x) from the
// surrogate mean and the (n-1)-divisor variance. Standard errors come from a
// parametric bootstrap of n_boot refits when n_boot > 0, otherwise from the
// observed information of the calibrated likelihood.
FitResult fit_rc(const Dataset& data, const MeasurementSpec& meas, const ModelSpec& spec, int n_boot,
                 std::uint64_t seed, const FitOptions& options = {});

// Two-step maximum pseudo-likelihood with sandwich covariance.
FitResult fit_mpl(const Dataset& data, const MeasurementSpec& meas, const ModelSpec& spec, const HermiteRule& rule,
                  const FitOptions& options = {});

// Joint approximate maximum likelihood over (theta, delta).
FitResult fit_aml(const Dataset& data, const MeasurementSpec& meas, const ModelSpec& spec, const HermiteRule& rule,
                  const FitOptions& options = {});

FitResult fit(Method method, const Dataset& data, const MeasurementSpec& meas, const ModelSpec& spec,
              const FitOptions& options = {});

// Closed-form maximiser of l_r: mu_x = (wbar - tau0) / tau1 and s2_x from
// the n-divisor surrogate variance. Throws InfeasibleError if s2_x <= 0.
DeltaParams reduced_likelihood_estimate(const Dataset& data, const MeasurementSpec& meas);

// Surrogate moments with the (n-1) divisor, used by regression calibration.
DeltaParams calibration_nuisance_estimate(const Dataset& data, const MeasurementSpec& meas);

// Building blocks of the pseudo-likelihood covariance, all as sums over
// observations evaluated at (theta_hat, delta_hat).
struct SandwichParts {
  Eigen::MatrixXd info_theta_theta;
  Eigen::MatrixXd info_theta_delta;
  Eigen::MatrixXd info_delta_delta;
  Eigen::MatrixXd score_outer_delta;  // sum_t s_t s_t', s_t = d l_rt / d delta
};

SandwichParts pseudo_likelihood_sandwich_parts(const Dataset& data, const ThetaParams& theta,
                                               const DeltaParams& delta_hat, const MeasurementSpec& meas,
                                               const HermiteRule& rule, const ModelSpec& spec,
                                               NuisanceInformation which = NuisanceInformation::reduced);

//   Sigma = I_tt^-1 + I_tt^-1 I_td I_dd^-1 S_dd I_dd^-1 I_td' I_tt^-1
Eigen::MatrixXd sandwich_covariance(const SandwichParts& parts);

// estimate +/- z_{(1+level)/2} se
std::pair<double, double> wald_interval(double estimate, double se, double level);

// Two-sided normal p-value of z = estimate / se.
double wald_p_value(double z);

}  // namespace eivbeta
