#include "eivbeta/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "eivbeta/error.hpp"
#include "eivbeta/special.hpp"

namespace eivbeta {
namespace {

constexpr Eigen::Index kParallelThreshold = 64;

// Beta log-density with log y and log(1-y) precomputed; log Gamma(phi) is
// passed in so callers can hoist it when phi does not vary across nodes.
inline double beta_kernel(double mu, double phi, double lgamma_phi, double log_y, double log1m_y) {
  const double a = mu * phi;
  const double b = (1.0 - mu) * phi;
  return lgamma_phi - detail::log_gamma_unchecked(a) - detail::log_gamma_unchecked(b) + (a - 1.0) * log_y +
         (b - 1.0) * log1m_y;
}

double sum_terms(const std::vector<double>& terms) {
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

struct SurrogateModel {
  double tau0, tau1, mu_x, total_variance, cond_variance, reliability;
};

SurrogateModel surrogate_model(const DeltaParams& delta, const MeasurementSpec& meas) {
  const double s2e = meas.error_variance(delta.sigma2_x);
  const double total = meas.tau1() * meas.tau1() * delta.sigma2_x + s2e;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateModelError("surrogate variance tau1^2 s2_x + s2_e must be positive and finite");
  }
  const ConditionalMoments cm = conditional_moments(meas.tau0(), delta, meas);
  return {meas.tau0(), meas.tau1(), delta.mu_x, total, cm.variance, cm.reliability};
}

inline double marginal_term(double w, const SurrogateModel& m) {
  const double r = w - (m.tau0 + m.tau1 * m.mu_x);
  return -0.5 * std::log(2.0 * std::numbers::pi * m.total_variance) - r * r / (2.0 * m.total_variance);
}

}  // namespace

double beta_log_density(double y, double mu, double phi) {
  if (!(y > 0.0 && y < 1.0)) throw DomainError("beta_log_density: y must lie in (0,1)");
  if (!(mu > 0.0 && mu < 1.0)) throw DomainError("beta_log_density: mu must lie in (0,1)");
  if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("beta_log_density: phi must be positive");
  return beta_kernel(mu, phi, detail::log_gamma_unchecked(phi), std::log(y), std::log1p(-y));
}

LoglikValue loglik_w_marginal(const Dataset& data, const DeltaParams& delta, const MeasurementSpec& meas) {
  const SurrogateModel m = surrogate_model(delta, meas);
  LoglikValue out;
  out.terms.resize(data.size());
  for (Eigen::Index t = 0; t < data.size(); ++t) out.terms[t] = marginal_term(data.w()[t], m);
  out.value = sum_terms(out.terms);
  return out;
}

LoglikValue loglik_approx(const Dataset& data, const ThetaParams& theta, const DeltaParams& delta,
                          const MeasurementSpec& meas, const HermiteRule& rule, const ModelSpec& spec) {
  const SurrogateModel m = surrogate_model(delta, meas);
  const Eigen::Index n = data.size();
  const int q_count = rule.order;
  const bool collapsed = m.cond_variance == 0.0;
  const double spread = std::sqrt(2.0 * m.cond_variance);
  const bool constant_phi = theta.lambda == 0.0;
  const Eigen::VectorXd mean_offset = data.z() * theta.alpha;
  const Eigen::VectorXd precision_offset = data.v() * theta.gamma;
  const Eigen::VectorXd& w = data.w();
  const Eigen::VectorXd& log_y = data.log_y();
  const Eigen::VectorXd& log1m_y = data.log1m_y();
  const MeanLink& g = spec.mean_link;
  const PrecisionLink& h = spec.precision_link;

  LoglikValue out;
  out.terms.resize(n);
  double* terms = out.terms.data();

#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (Eigen::Index t = 0; t < n; ++t) {
    const double l1 = marginal_term(w[t], m);
    const double cond_mean =
        collapsed ? (w[t] - m.tau0) / m.tau1 : m.mu_x + m.reliability * (w[t] - (m.tau0 + m.tau1 * m.mu_x));
    double l2;
    if (collapsed) {
      const double mu = g.inverse(mean_offset[t] + cond_mean * theta.beta);
      const double phi = h.inverse(precision_offset[t] + cond_mean * theta.lambda);
      l2 = beta_kernel(mu, phi, detail::log_gamma_unchecked(phi), log_y[t], log1m_y[t]);
    } else {
      double node_terms[kMaxHermiteOrder];
      double largest = -std::numeric_limits<double>::infinity();
      const double phi_fixed = h.inverse(precision_offset[t]);
      const double lgamma_fixed = detail::log_gamma_unchecked(phi_fixed);
      for (int q = 0; q < q_count; ++q) {
        const double x = cond_mean + spread * rule.nodes[q];
        const double mu = g.inverse(mean_offset[t] + x * theta.beta);
        double value;
        if (constant_phi) {
          value = beta_kernel(mu, phi_fixed, lgamma_fixed, log_y[t], log1m_y[t]);
        } else {
          const double phi = h.inverse(precision_offset[t] + x * theta.lambda);
          value = beta_kernel(mu, phi, detail::log_gamma_unchecked(phi), log_y[t], log1m_y[t]);
        }
        value += rule.log_normalized_weights[q];
        node_terms[q] = value;
        largest = std::max(largest, value);
      }
      if (std::isfinite(largest)) {
        double acc = 0.0;
        for (int q = 0; q < q_count; ++q) acc += std::exp(node_terms[q] - largest);
        l2 = largest + std::log(acc);
      } else {
        l2 = largest;
      }
    }
    terms[t] = l1 + l2;
  }
  out.value = sum_terms(out.terms);
  return out;
}

LoglikValue loglik_pseudo(const Dataset& data, const ThetaParams& theta, const DeltaParams& delta_hat,
                          const MeasurementSpec& meas, const HermiteRule& rule, const ModelSpec& spec) {
  return loglik_approx(data, theta, delta_hat, meas, rule, spec);
}

LoglikValue loglik_calibration(const Dataset& data, const ThetaParams& theta, std::span<const double> x_tilde,
                               const ModelSpec& spec) {
  const Eigen::Index n = data.size();
  if (static_cast<Eigen::Index>(x_tilde.size()) != n) {
    throw DomainError("loglik_calibration: x_tilde length does not match the dataset");
  }
  const Eigen::VectorXd mean_offset = data.z() * theta.alpha;
  const Eigen::VectorXd precision_offset = data.v() * theta.gamma;
  LoglikValue out;
  out.terms.resize(n);
  double* terms = out.terms.data();

#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (Eigen::Index t = 0; t < n; ++t) {
    const double mu = spec.mean_link.inverse(mean_offset[t] + x_tilde[t] * theta.beta);
    const double phi = spec.precision_link.inverse(precision_offset[t] + x_tilde[t] * theta.lambda);
    terms[t] = beta_kernel(mu, phi, detail::log_gamma_unchecked(phi), data.log_y()[t], data.log1m_y()[t]);
  }
  out.value = sum_terms(out.terms);
  return out;
}

LoglikValue loglik_naive(const Dataset& data, const ThetaParams& theta, const ModelSpec& spec) {
  const Eigen::VectorXd& w = data.w();
  return loglik_calibration(data, theta, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())),
                            spec);
}

}  // namespace eivbeta
