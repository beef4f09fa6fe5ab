#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

namespace eivbeta {

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Central differences, h_i = step * max(1, |x_i|). The default step is
// eps^(1/3). Throws EvaluationError (with the coordinate) when f is not
// finite at a probe point.
Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x);
Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double step);

// Central second differences with h_i = eps^(1/4) * max(1, |x_i|),
// symmetrised as (H + H') / 2.
Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x);

struct OptimOptions {
  double tol = 1e-6;
  int max_iter = 500;
  bool compute_hessian = false;
};

struct OptimResult {
  Eigen::VectorXd maximizer;
  double value = 0.0;
  double gradient_norm = 0.0;  // infinity norm at the maximizer
  int iterations = 0;
  bool converged = false;
  // Stopped on step underflow or stagnation with
  // ||grad||_inf <= sqrt(tol) * max(1, |f|): no ascent is visible at the
  // rounding level of f, but the difference gradient is still above tol.
  // Counted as converged.
  bool weak = false;
  // Observed information (negative Hessian of f), when requested.
  std::optional<Eigen::MatrixXd> hessian;
};

// BFGS ascent with Armijo backtracking (c = 1e-4, shrink 0.5). Converged
// means ||grad||_inf <= tol * max(1, |f|). Iteration stops early when the
// line search underflows or three accepted steps in a row gain nothing above
// the rounding level of f; either stop counts as (weak) convergence when the
// gradient passes the test with sqrt(tol) in place of tol. Throws
// EvaluationError when f(x0) is not finite.
OptimResult maximize(const Objective& f, const Eigen::VectorXd& x0, const OptimOptions& options = {});

}  // namespace eivbeta
