#include "eivbeta/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "eivbeta/error.hpp"
#include "eivbeta/special.hpp"

namespace eivbeta {

MeanLink MeanLink::from_name(std::string_view name) {
  if (name == "logit") return MeanLink(MeanLinkKind::logit);
  if (name == "probit") return MeanLink(MeanLinkKind::probit);
  if (name == "cloglog") return MeanLink(MeanLinkKind::cloglog);
  throw DomainError("unknown mean link '" + std::string(name) + "' (expected logit, probit or cloglog)");
}

std::string_view MeanLink::name() const {
  switch (kind_) {
    case MeanLinkKind::logit: return "logit";
    case MeanLinkKind::probit: return "probit";
    case MeanLinkKind::cloglog: return "cloglog";
  }
  return "logit";
}

double MeanLink::forward(double mu) const {
  switch (kind_) {
    case MeanLinkKind::logit: return std::log(mu) - std::log1p(-mu);
    case MeanLinkKind::probit: return normal_quantile(mu);
    case MeanLinkKind::cloglog: return std::log(-std::log1p(-mu));
  }
  return 0.0;
}

double MeanLink::inverse(double eta) const {
  double mu = 0.5;
  switch (kind_) {
    case MeanLinkKind::logit:
      if (eta >= 0.0) {
        mu = 1.0 / (1.0 + std::exp(-eta));
      } else {
        const double e = std::exp(eta);
        mu = e / (1.0 + e);
      }
      break;
    case MeanLinkKind::probit: mu = normal_cdf(eta); break;
    case MeanLinkKind::cloglog: mu = -std::expm1(-std::exp(std::min(eta, 700.0))); break;
  }
  if (std::isnan(mu)) mu = 0.5;
  return std::clamp(mu, kMuClamp, 1.0 - kMuClamp);
}

double MeanLink::derivative(double mu) const {
  switch (kind_) {
    case MeanLinkKind::logit: return 1.0 / (mu * (1.0 - mu));
    case MeanLinkKind::probit: {
      const double q = normal_quantile(mu);
      const double density = std::exp(-0.5 * q * q) / std::sqrt(2.0 * std::numbers::pi);
      return 1.0 / density;
    }
    case MeanLinkKind::cloglog: return -1.0 / ((1.0 - mu) * std::log1p(-mu));
  }
  return 0.0;
}

PrecisionLink PrecisionLink::from_name(std::string_view name) {
  if (name == "log") return PrecisionLink(PrecisionLinkKind::log);
  throw DomainError("unknown precision link '" + std::string(name) + "' (expected log)");
}

std::string_view PrecisionLink::name() const { return "log"; }
double PrecisionLink::forward(double phi) const { return std::log(phi); }
double PrecisionLink::inverse(double eta) const { return std::exp(std::clamp(eta, -700.0, 700.0)); }
double PrecisionLink::derivative(double phi) const { return 1.0 / phi; }

Dataset Dataset::create(Eigen::VectorXd y, Eigen::MatrixXd mean_design, Eigen::MatrixXd precision_design,
                        Eigen::VectorXd surrogate) {
  const Eigen::Index n = y.size();
  if (mean_design.rows() != n || precision_design.rows() != n || surrogate.size() != n) {
    throw DomainError("dataset: y, Z, V and w must have the same number of rows");
  }
  const Eigen::Index needed = mean_design.cols() + precision_design.cols() + 2;
  if (n <= needed) {
    throw DomainError("dataset: need n > p_alpha + p_gamma + 2 = " + std::to_string(needed) + ", got n = " +
                      std::to_string(n));
  }
  for (Eigen::Index t = 0; t < n; ++t) {
    if (!(y[t] > 0.0 && y[t] < 1.0)) {
      throw DomainError("dataset: response y[" + std::to_string(t) + "] = " + std::to_string(y[t]) +
                        " is outside (0,1)");
    }
    if (!std::isfinite(surrogate[t])) {
      throw DomainError("dataset: surrogate w[" + std::to_string(t) + "] is not finite");
    }
  }
  if (!mean_design.allFinite() || !precision_design.allFinite()) {
    throw DomainError("dataset: design matrices contain non-finite entries");
  }
  Dataset d;
  d.log_y_ = y.array().log();
  d.log1m_y_ = (-y.array()).log1p();
  d.y_ = std::move(y);
  d.z_ = std::move(mean_design);
  d.v_ = std::move(precision_design);
  d.w_ = std::move(surrogate);
  return d;
}

Dataset Dataset::with_response(Eigen::VectorXd y) const { return create(std::move(y), z_, v_, w_); }

Dataset Dataset::permuted(const std::vector<Eigen::Index>& order) const {
  const Eigen::Index n = size();
  if (static_cast<Eigen::Index>(order.size()) != n) throw DomainError("dataset: permutation has wrong length");
  Eigen::VectorXd y(n), w(n);
  Eigen::MatrixXd z(n, z_.cols()), v(n, v_.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = y_[order[i]];
    w[i] = w_[order[i]];
    z.row(i) = z_.row(order[i]);
    v.row(i) = v_.row(order[i]);
  }
  return create(std::move(y), std::move(z), std::move(v), std::move(w));
}

MeasurementSpec MeasurementSpec::from_error_variance(double tau0, double tau1, double sigma2_e) {
  if (!std::isfinite(tau0) || !std::isfinite(tau1) || tau1 == 0.0) {
    throw DomainError("measurement spec: tau0 must be finite and tau1 finite and nonzero");
  }
  if (!std::isfinite(sigma2_e) || sigma2_e < 0.0) {
    throw DomainError("measurement spec: error variance must be finite and nonnegative");
  }
  return MeasurementSpec(tau0, tau1, sigma2_e, std::nullopt);
}

MeasurementSpec MeasurementSpec::from_reliability(double tau0, double tau1, double kx) {
  if (!std::isfinite(tau0) || !std::isfinite(tau1) || tau1 <= 0.0) {
    throw DomainError("measurement spec: the reliability form needs a finite tau0 and tau1 > 0");
  }
  if (!(kx > 0.0 && kx <= 1.0)) throw DomainError("measurement spec: reliability ratio must lie in (0,1]");
  if (tau1 * kx > 1.0) throw DomainError("measurement spec: tau1 * kx > 1 implies a negative error variance");
  return MeasurementSpec(tau0, tau1, std::nullopt, kx);
}

double MeasurementSpec::error_variance(double sigma2_x) const {
  if (sigma2_e_) return *sigma2_e_;
  return tau1_ * sigma2_x * (1.0 - tau1_ * *kx_) / *kx_;
}

double MeasurementSpec::reliability(double sigma2_x) const {
  if (kx_) return *kx_;
  const double total = tau1_ * tau1_ * sigma2_x + *sigma2_e_;
  if (total == 0.0) throw DegenerateModelError("measurement spec: zero surrogate variance");
  return tau1_ * sigma2_x / total;
}

double MeasurementSpec::latent_variance_from_total(double total_variance) const {
  double s2x;
  if (kx_) {
    s2x = *kx_ * total_variance / tau1_;
  } else {
    s2x = (total_variance - *sigma2_e_) / (tau1_ * tau1_);
  }
  if (!(s2x > 0.0) || !std::isfinite(s2x)) {
    const std::string versus = sigma2_e_ ? "measurement error variance " + std::to_string(*sigma2_e_)
                                         : "reliability ratio " + std::to_string(*kx_);
    throw InfeasibleError("implied latent variance is not positive: surrogate variance " +
                          std::to_string(total_variance) + " vs " + versus);
  }
  return s2x;
}

Eigen::VectorXd ThetaParams::pack(const ModelSpec& spec) const {
  const Eigen::Index size = packed_size(alpha.size(), gamma.size(), spec);
  Eigen::VectorXd out(size);
  out.head(alpha.size()) = alpha;
  out[alpha.size()] = beta;
  out.segment(alpha.size() + 1, gamma.size()) = gamma;
  if (spec.x_in_precision) out[size - 1] = lambda;
  return out;
}

ThetaParams ThetaParams::unpack(const Eigen::Ref<const Eigen::VectorXd>& packed, Eigen::Index p_alpha,
                                Eigen::Index p_gamma, const ModelSpec& spec) {
  ThetaParams theta;
  theta.alpha = packed.head(p_alpha);
  theta.beta = packed[p_alpha];
  theta.gamma = packed.segment(p_alpha + 1, p_gamma);
  theta.lambda = spec.x_in_precision ? packed[p_alpha + 1 + p_gamma] : 0.0;
  return theta;
}

Eigen::Index ThetaParams::packed_size(Eigen::Index p_alpha, Eigen::Index p_gamma, const ModelSpec& spec) {
  return p_alpha + 1 + p_gamma + (spec.x_in_precision ? 1 : 0);
}

std::vector<std::string> ThetaParams::names(Eigen::Index p_alpha, Eigen::Index p_gamma, const ModelSpec& spec) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < p_alpha; ++j) out.push_back(p_alpha == 1 ? "alpha" : "alpha" + std::to_string(j));
  out.emplace_back("beta");
  for (Eigen::Index j = 0; j < p_gamma; ++j) out.push_back(p_gamma == 1 ? "gamma" : "gamma" + std::to_string(j));
  if (spec.x_in_precision) out.emplace_back("lambda");
  return out;
}

bool ThetaParams::finite() const {
  return alpha.allFinite() && gamma.allFinite() && std::isfinite(beta) && std::isfinite(lambda);
}

double mu_t(const ThetaParams& theta, const Eigen::Ref<const Eigen::RowVectorXd>& z_row, double x,
            const MeanLink& link) {
  return link.inverse(z_row.dot(theta.alpha) + x * theta.beta);
}

double phi_t(const ThetaParams& theta, const Eigen::Ref<const Eigen::RowVectorXd>& v_row, double x,
             const PrecisionLink& link) {
  return link.inverse(v_row.dot(theta.gamma) + x * theta.lambda);
}

ConditionalMoments conditional_moments(double w, const DeltaParams& delta, const MeasurementSpec& meas) {
  const double tau1 = meas.tau1();
  const double s2e = meas.error_variance(delta.sigma2_x);
  const double total = tau1 * tau1 * delta.sigma2_x + s2e;
  if (!(total > 0.0)) {
    throw DegenerateModelError("conditional moments: tau1^2 s2_x + s2_e must be positive");
  }
  if (s2e == 0.0) return {(w - meas.tau0()) / tau1, 0.0, 1.0 / tau1};
  const double k = tau1 * delta.sigma2_x / total;
  const double mean = delta.mu_x + k * (w - (meas.tau0() + tau1 * delta.mu_x));
  return {mean, s2e * delta.sigma2_x / total, k};
}

}  // namespace eivbeta
