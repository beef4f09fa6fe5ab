// Reference implementations: one observation at a time through the public
// model functions, no hoisting, no threading.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "eivbeta/error.hpp"
#include "eivbeta/likelihood.hpp"

namespace eivbeta::serial {

LoglikValue loglik_approx(const Dataset& data, const ThetaParams& theta, const DeltaParams& delta,
                          const MeasurementSpec& meas, const HermiteRule& rule, const ModelSpec& spec) {
  const LoglikValue marginal = loglik_w_marginal(data, delta, meas);
  LoglikValue out;
  out.terms.resize(data.size());
  std::vector<double> node_terms(rule.order);
  for (Eigen::Index t = 0; t < data.size(); ++t) {
    const ConditionalMoments cm = conditional_moments(data.w()[t], delta, meas);
    double l2;
    if (cm.variance == 0.0) {
      l2 = beta_log_density(data.y()[t], mu_t(theta, data.z().row(t), cm.mean, spec.mean_link),
                            phi_t(theta, data.v().row(t), cm.mean, spec.precision_link));
    } else {
      for (int q = 0; q < rule.order; ++q) {
        const double x = cm.mean + std::sqrt(2.0 * cm.variance) * rule.nodes[q];
        node_terms[q] = std::log(rule.weights[q] / std::sqrt(std::numbers::pi)) +
                        beta_log_density(data.y()[t], mu_t(theta, data.z().row(t), x, spec.mean_link),
                                         phi_t(theta, data.v().row(t), x, spec.precision_link));
      }
      const double largest = *std::max_element(node_terms.begin(), node_terms.end());
      if (std::isfinite(largest)) {
        double acc = 0.0;
        for (double a : node_terms) acc += std::exp(a - largest);
        l2 = largest + std::log(acc);
      } else {
        l2 = largest;
      }
    }
    out.terms[t] = marginal.terms[t] + l2;
  }
  double total = 0.0;
  for (double term : out.terms) total += term;
  out.value = total;
  return out;
}

LoglikValue loglik_calibration(const Dataset& data, const ThetaParams& theta, std::span<const double> x_tilde,
                               const ModelSpec& spec) {
  if (static_cast<Eigen::Index>(x_tilde.size()) != data.size()) {
    throw DomainError("loglik_calibration: x_tilde length does not match the dataset");
  }
  LoglikValue out;
  out.terms.resize(data.size());
  double total = 0.0;
  for (Eigen::Index t = 0; t < data.size(); ++t) {
    out.terms[t] = beta_log_density(data.y()[t], mu_t(theta, data.z().row(t), x_tilde[t], spec.mean_link),
                                    phi_t(theta, data.v().row(t), x_tilde[t], spec.precision_link));
    total += out.terms[t];
  }
  out.value = total;
  return out;
}

}  // namespace eivbeta::serial
