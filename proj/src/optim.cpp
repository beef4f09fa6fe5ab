#include "eivbeta/optim.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "eivbeta/error.hpp"

namespace eivbeta {
namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr double kMinStep = 1e-12;

double checked(const Objective& f, const Eigen::VectorXd& x, int coordinate) {
  const double value = f(x);
  if (!std::isfinite(value)) {
    throw EvaluationError("objective is not finite at a probe point along coordinate " + std::to_string(coordinate),
                          coordinate);
  }
  return value;
}

double gradient_threshold(double tol, double value) { return tol * std::max(1.0, std::fabs(value)); }

}  // namespace

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x) {
  return numerical_gradient(f, x, std::cbrt(std::numeric_limits<double>::epsilon()));
}

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::fabs(x[i]));
    probe[i] = x[i] + h;
    const double up = checked(f, probe, static_cast<int>(i));
    probe[i] = x[i] - h;
    const double down = checked(f, probe, static_cast<int>(i));
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x) {
  const Eigen::Index k = x.size();
  const double step = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  Eigen::VectorXd h(k);
  for (Eigen::Index i = 0; i < k; ++i) h[i] = step * std::max(1.0, std::fabs(x[i]));

  const double center = checked(f, x, -1);
  Eigen::MatrixXd hess(k, k);
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < k; ++i) {
    probe[i] = x[i] + h[i];
    const double up = checked(f, probe, static_cast<int>(i));
    probe[i] = x[i] - h[i];
    const double down = checked(f, probe, static_cast<int>(i));
    probe[i] = x[i];
    hess(i, i) = (up - 2.0 * center + down) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      double corners[4];
      const double si[4] = {1, 1, -1, -1};
      const double sj[4] = {1, -1, 1, -1};
      for (int c = 0; c < 4; ++c) {
        probe[i] = x[i] + si[c] * h[i];
        probe[j] = x[j] + sj[c] * h[j];
        corners[c] = checked(f, probe, static_cast<int>(i));
      }
      probe[i] = x[i];
      probe[j] = x[j];
      hess(i, j) = (corners[0] - corners[1] - corners[2] + corners[3]) / (4.0 * h[i] * h[j]);
      hess(j, i) = hess(i, j);
    }
  }
  return 0.5 * (hess + hess.transpose());
}

OptimResult maximize(const Objective& f, const Eigen::VectorXd& x0, const OptimOptions& options) {
  const Eigen::Index k = x0.size();
  OptimResult result;
  Eigen::VectorXd x = x0;
  double value = f(x);
  if (!std::isfinite(value)) throw EvaluationError("objective is not finite at the starting point", -1);

  Eigen::VectorXd grad;
  try {
    grad = numerical_gradient(f, x);
  } catch (const EvaluationError&) {
    result.maximizer = x;
    result.value = value;
    result.gradient_norm = std::numeric_limits<double>::infinity();
    return result;
  }

  // Inverse of the negative Hessian approximation.
  Eigen::MatrixXd inv_info = Eigen::MatrixXd::Identity(k, k);
  bool first_step = true;
  int stalled = 0;
  bool stopped_early = false;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() <= gradient_threshold(options.tol, value)) break;

    Eigen::VectorXd direction = inv_info * grad;
    double slope = grad.dot(direction);
    if (!(slope > 0.0) || !direction.allFinite()) {
      inv_info.setIdentity();
      direction = grad;
      slope = grad.dot(direction);
      first_step = true;
    }
    if (first_step) {
      // unit-length first move; the curvature scale is unknown until one update
      const double norm = direction.norm();
      if (norm > 1.0) {
        direction /= norm;
        slope /= norm;
      }
    }

    double step = 1.0;
    Eigen::VectorXd candidate;
    double candidate_value = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    while (step >= kMinStep) {
      candidate = x + step * direction;
      candidate_value = f(candidate);
      if (std::isfinite(candidate_value) && candidate_value >= value + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= kShrink;
    }
    if (!accepted) {
      stopped_early = true;
      break;
    }

    Eigen::VectorXd candidate_grad;
    try {
      candidate_grad = numerical_gradient(f, candidate);
    } catch (const EvaluationError&) {
      break;
    }

    // gains at the rounding level of f mean the gradient test cannot be met
    const double gain = candidate_value - value;
    stalled = gain <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(value)) ? stalled + 1 : 0;

    const Eigen::VectorXd s = candidate - x;
    // curvature pair for the negative objective
    const Eigen::VectorXd y = grad - candidate_grad;
    const double sy = s.dot(y);
    x = candidate;
    value = candidate_value;
    grad = candidate_grad;

    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (first_step) {
        inv_info *= sy / y.squaredNorm();
        first_step = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(k, k);
      inv_info = (eye - rho * s * y.transpose()) * inv_info * (eye - rho * y * s.transpose()) +
                 rho * s * s.transpose();
    }
    if (stalled >= 3) {
      stopped_early = true;
      ++iter;
      break;
    }
  }

  result.maximizer = x;
  result.value = value;
  result.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  result.iterations = iter;
  result.converged = result.gradient_norm <= gradient_threshold(options.tol, value);
  if (!result.converged && stopped_early &&
      result.gradient_norm <= gradient_threshold(std::sqrt(options.tol), value)) {
    // rough objectives (quadrature aliasing) stall on a numerical local max
    result.converged = result.weak = true;
  }
  if (options.compute_hessian) {
    try {
      result.hessian = -numerical_hessian(f, x);
    } catch (const EvaluationError&) {
      result.converged = false;
    }
  }
  return result;
}

}  // namespace eivbeta
