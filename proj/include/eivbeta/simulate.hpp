#pragma once

// Data generation from the structural model and the Monte Carlo harness.

#include <cstdint>
#include <string>
#include <vector>

#include "eivbeta/estimators.hpp"
#include "eivbeta/model.hpp"

namespace eivbeta {

struct SimDesign {
  int n = 100;
  ThetaParams theta_true;  // single intercept in each submodel
  DeltaParams delta_true{2.5, 2.7};
  MeasurementSpec meas = MeasurementSpec::from_reliability(0.0, 1.0, 0.75);
  ModelSpec spec{};  // spec.x_in_precision doubles as "precision varying"
  int n_reps = 500;
  int quad_points = 50;
  std::uint64_t seed = 1;
  double level = 0.95;
  int n_boot = 200;  // regression calibration bootstrap size inside each replicate

  // alpha = 2, beta = -0.6, mu_x = 2.5, s2_x = 2.7, tau0 = 0, tau1 = 1 and
  // either gamma = 2.5 (constant precision) or gamma = 4, lambda = 0.5.
  static SimDesign standard(bool precision_varying, double kx, int n);

  // Throws DomainError unless n >= 5, n_reps >= 1 and everything is finite.
  void validate() const;
};

struct SimulatedSample {
  Dataset data;
  Eigen::VectorXd x;  // latent covariate
};

// Replicate `replicate_index` drawn on stream (design.seed, replicate_index).
// Per observation the draws are x, then e, then y.
SimulatedSample simulate_sample(const SimDesign& design, std::uint64_t replicate_index);
Dataset simulate_dataset(const SimDesign& design, std::uint64_t replicate_index);

struct McCell {
  Method method = Method::naive;
  std::string parameter;
  double truth = 0.0;
  double bias = 0.0;     // mean(estimate) - truth
  double rmse = 0.0;
  double coverage = 0.0;  // fraction of Wald intervals containing the truth
  double bias_se = 0.0;   // Monte Carlo standard error of the bias
  int n_used = 0;
};

struct McReport {
  double kx = 0.0;
  int n = 0;
  int n_reps = 0;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::string rng_description;
  std::vector<Method> methods;
  std::vector<int> n_fail;  // parallel to methods
  std::vector<McCell> cells;  // methods outer, parameters inner

  const McCell& cell(Method method, const std::string& parameter) const;
  int failures(Method method) const;
};

// Per replicate: simulate, fit every method, record estimates of theta and
// whether the Wald interval covers the truth. Fits that fail or do not
// converge are excluded from the aggregates and counted in n_fail.
// threads <= 0 uses the OpenMP default. The report does not depend on the
// thread count.
McReport run_monte_carlo(const SimDesign& design, const std::vector<Method>& methods, int threads = 0);

}  // namespace eivbeta
