#pragma once

// Domain types of the errors-in-variables beta regression model
//
//   y_t | x_t ~ Beta(mu_t, phi_t)
//   g(mu_t)  = z_t' alpha + x_t beta
//   h(phi_t) = v_t' gamma + x_t lambda
//   w_t = tau0 + tau1 x_t + e_t,   x_t ~ N(mu_x, s2_x),  e_t ~ N(0, s2_e)
//
// with a single latent covariate x shared by both submodels.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eivbeta {

// Inverse links keep mu inside [kMuClamp, 1 - kMuClamp] so the beta
// log-density never sees an exact 0 or 1.
inline constexpr double kMuClamp = 1e-12;

enum class MeanLinkKind { logit, probit, cloglog };
enum class PrecisionLinkKind { log };

class MeanLink {
 public:
  explicit MeanLink(MeanLinkKind kind = MeanLinkKind::logit) : kind_(kind) {}
  static MeanLink from_name(std::string_view name);

  double forward(double mu) const;
  // Clamped to [kMuClamp, 1 - kMuClamp].
  double inverse(double eta) const;
  // g'(mu)
  double derivative(double mu) const;

  MeanLinkKind kind() const { return kind_; }
  std::string_view name() const;

 private:
  MeanLinkKind kind_;
};

class PrecisionLink {
 public:
  explicit PrecisionLink(PrecisionLinkKind kind = PrecisionLinkKind::log) : kind_(kind) {}
  static PrecisionLink from_name(std::string_view name);

  double forward(double phi) const;
  // Exponent clamped to [-700, 700]; always returns a positive finite value.
  double inverse(double eta) const;
  double derivative(double phi) const;

  PrecisionLinkKind kind() const { return kind_; }
  std::string_view name() const;

 private:
  PrecisionLinkKind kind_;
};

// Link functions plus the one structural choice the estimators need: whether
// the latent covariate enters the precision submodel (lambda estimated) or
// not (lambda fixed at 0, the constant-precision design).
struct ModelSpec {
  MeanLink mean_link{};
  PrecisionLink precision_link{};
  bool x_in_precision = true;
};

class Dataset {
 public:
  // Validates 0 < y < 1, finiteness, matching row counts and
  // n > p_alpha + p_gamma + 2. Throws DomainError.
  static Dataset create(Eigen::VectorXd y, Eigen::MatrixXd mean_design, Eigen::MatrixXd precision_design,
                        Eigen::VectorXd surrogate);

  Eigen::Index size() const { return y_.size(); }
  Eigen::Index mean_columns() const { return z_.cols(); }
  Eigen::Index precision_columns() const { return v_.cols(); }

  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& z() const { return z_; }
  const Eigen::MatrixXd& v() const { return v_; }
  const Eigen::VectorXd& w() const { return w_; }
  const Eigen::VectorXd& log_y() const { return log_y_; }
  const Eigen::VectorXd& log1m_y() const { return log1m_y_; }

  // Same covariates, different responses (used by bootstrap and envelopes).
  Dataset with_response(Eigen::VectorXd y) const;
  // Rows reordered: row i of the result is row order[i] of this dataset.
  Dataset permuted(const std::vector<Eigen::Index>& order) const;

 private:
  Dataset() = default;
  Eigen::VectorXd y_, w_, log_y_, log1m_y_;
  Eigen::MatrixXd z_, v_;
};

// Known measurement-error mechanism. Either the error variance s2_e is known,
// or the reliability ratio k_x is, in which case
//   s2_e = tau1 s2_x (1 - tau1 k_x) / k_x
// is resolved against whichever s2_x is current (nuisance estimate when
// fitting, truth when simulating).
class MeasurementSpec {
 public:
  static MeasurementSpec from_error_variance(double tau0, double tau1, double sigma2_e);
  static MeasurementSpec from_reliability(double tau0, double tau1, double kx);

  double tau0() const { return tau0_; }
  double tau1() const { return tau1_; }
  bool reliability_form() const { return kx_.has_value(); }
  std::optional<double> fixed_error_variance() const { return sigma2_e_; }
  std::optional<double> fixed_reliability() const { return kx_; }

  double error_variance(double sigma2_x) const;
  double reliability(double sigma2_x) const;
  // Inverts the surrogate variance tau1^2 s2_x + s2_e(s2_x) for s2_x.
  // Throws InfeasibleError when the implied latent variance is not positive.
  double latent_variance_from_total(double total_variance) const;

 private:
  MeasurementSpec(double tau0, double tau1, std::optional<double> s2e, std::optional<double> kx)
      : tau0_(tau0), tau1_(tau1), sigma2_e_(s2e), kx_(kx) {}
  double tau0_;
  double tau1_;
  std::optional<double> sigma2_e_;
  std::optional<double> kx_;
};

struct ThetaParams {
  Eigen::VectorXd alpha;
  double beta = 0.0;
  Eigen::VectorXd gamma;
  double lambda = 0.0;

  // Layout: [alpha..., beta, gamma..., lambda?]; lambda present only when
  // spec.x_in_precision.
  Eigen::VectorXd pack(const ModelSpec& spec) const;
  static ThetaParams unpack(const Eigen::Ref<const Eigen::VectorXd>& packed, Eigen::Index p_alpha,
                            Eigen::Index p_gamma, const ModelSpec& spec);
  static Eigen::Index packed_size(Eigen::Index p_alpha, Eigen::Index p_gamma, const ModelSpec& spec);
  static std::vector<std::string> names(Eigen::Index p_alpha, Eigen::Index p_gamma, const ModelSpec& spec);
  bool finite() const;
};

struct DeltaParams {
  double mu_x = 0.0;
  double sigma2_x = 1.0;
};

struct ConditionalMoments {
  double mean;
  double variance;
  double reliability;
};

double mu_t(const ThetaParams& theta, const Eigen::Ref<const Eigen::RowVectorXd>& z_row, double x,
            const MeanLink& link);
double phi_t(const ThetaParams& theta, const Eigen::Ref<const Eigen::RowVectorXd>& v_row, double x,
             const PrecisionLink& link);

// Moments of x | w under the structural normal model. With s2_e == 0 the
// result is exactly ((w - tau0) / tau1, 0). Throws DegenerateModelError when
// tau1^2 s2_x + s2_e == 0.
ConditionalMoments conditional_moments(double w, const DeltaParams& delta, const MeasurementSpec& meas);

}  // namespace eivbeta
