#include "eivbeta/estimators.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "eivbeta/error.hpp"
#include "eivbeta/likelihood.hpp"
#include "eivbeta/random.hpp"
#include "eivbeta/special.hpp"

namespace eivbeta {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Least-squares start on the link scale, precision from the moment match
// phi = mu (1 - mu) / var - 1 averaged over observations.
Eigen::VectorXd start_theta(const Dataset& data, std::span<const double> x, const ModelSpec& spec) {
  const Eigen::Index n = data.size();
  const Eigen::Index pa = data.mean_columns();
  Eigen::MatrixXd design(n, pa + 1);
  design.leftCols(pa) = data.z();
  Eigen::VectorXd ystar(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    design(t, pa) = x[t];
    ystar[t] = spec.mean_link.forward(data.y()[t]);
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(ystar);
  const Eigen::VectorXd eta = design * coef;
  const double dof = std::max<double>(1.0, static_cast<double>(n - pa - 1));
  const double s2 = (ystar - eta).squaredNorm() / dof;
  double phi_sum = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double mu = spec.mean_link.inverse(eta[t]);
    const double deriv = spec.mean_link.derivative(mu);
    const double var = s2 / (deriv * deriv);
    phi_sum += mu * (1.0 - mu) / var - 1.0;
  }
  double phi0 = phi_sum / static_cast<double>(n);
  if (!std::isfinite(phi0) || phi0 < 1.0) phi0 = 1.0;

  ThetaParams theta;
  theta.alpha = coef.head(pa);
  theta.beta = coef[pa];
  theta.gamma = data.v().colPivHouseholderQr().solve(
      Eigen::VectorXd::Constant(n, spec.precision_link.forward(phi0)));
  theta.lambda = 0.0;
  if (!theta.finite()) {
    theta.alpha.setZero();
    theta.beta = 0.0;
    theta.gamma.setZero();
  }
  return theta.pack(spec);
}

void set_covariance(FitResult& result, Eigen::MatrixXd covariance) {
  result.covariance = 0.5 * (covariance + covariance.transpose());
  result.se.resize(result.covariance.rows());
  for (Eigen::Index i = 0; i < result.se.size(); ++i) {
    const double v = result.covariance(i, i);
    result.se[i] = v >= 0.0 ? std::sqrt(v) : kNaN;
  }
}

void covariance_from_information(FitResult& result, const Eigen::MatrixXd& info) {
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (info + info.transpose()));
  if (llt.info() == Eigen::Success && info.allFinite()) {
    set_covariance(result, llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols())));
  } else {
    result.converged = false;
    result.message += "observed information is not positive definite; ";
    set_covariance(result, Eigen::MatrixXd::Constant(info.rows(), info.cols(), kNaN));
  }
}

void no_covariance(FitResult& result) {
  const Eigen::Index k = result.estimates.size();
  result.covariance = Eigen::MatrixXd::Constant(k, k, kNaN);
  result.se = Eigen::VectorXd::Constant(k, kNaN);
}

// Objectives may run into invalid parameter regions during line search or
// finite differencing; those evaluate to NaN and the optimiser backs off.
template <typename F>
double guarded(F&& f) {
  try {
    return f();
  } catch (const std::exception&) {
    return kNaN;
  }
}

Eigen::MatrixXd safe_inverse(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return m.fullPivLu().inverse();
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::naive: return "naive";
    case Method::aml: return "aml";
    case Method::mpl: return "mpl";
    case Method::rc: return "rc";
  }
  return "naive";
}

Method method_from_name(std::string_view name) {
  if (name == "naive") return Method::naive;
  if (name == "aml") return Method::aml;
  if (name == "mpl") return Method::mpl;
  if (name == "rc") return Method::rc;
  throw DomainError("unknown method '" + std::string(name) + "' (expected naive, aml, mpl or rc)");
}

std::string_view covariance_source_name(CovarianceSource source) {
  switch (source) {
    case CovarianceSource::observed_information: return "observed_information";
    case CovarianceSource::sandwich: return "sandwich";
    case CovarianceSource::parametric_bootstrap: return "parametric_bootstrap";
  }
  return "observed_information";
}

DeltaParams reduced_likelihood_estimate(const Dataset& data, const MeasurementSpec& meas) {
  const double n = static_cast<double>(data.size());
  const double mean = data.w().mean();
  const double var = (data.w().array() - mean).square().sum() / n;
  return {(mean - meas.tau0()) / meas.tau1(), meas.latent_variance_from_total(var)};
}

DeltaParams calibration_nuisance_estimate(const Dataset& data, const MeasurementSpec& meas) {
  const double n = static_cast<double>(data.size());
  const double mean = data.w().mean();
  const double var = (data.w().array() - mean).square().sum() / (n - 1.0);
  return {(mean - meas.tau0()) / meas.tau1(), meas.latent_variance_from_total(var)};
}

FitResult fit_beta_regression(const Dataset& data, std::span<const double> x, const ModelSpec& spec,
                              const FitOptions& options) {
  const Eigen::Index pa = data.mean_columns();
  const Eigen::Index pg = data.precision_columns();
  const Objective objective = [&](const Eigen::VectorXd& packed) {
    return guarded([&] { return loglik_calibration(data, ThetaParams::unpack(packed, pa, pg, spec), x, spec).value; });
  };
  const OptimResult opt = maximize(objective, start_theta(data, x, spec), options.optim);

  FitResult result;
  result.method = Method::naive;
  result.theta = ThetaParams::unpack(opt.maximizer, pa, pg, spec);
  result.names = ThetaParams::names(pa, pg, spec);
  result.estimates = opt.maximizer;
  result.loglik = loglik_calibration(data, result.theta, x, spec).value;
  result.converged = opt.converged;
  result.iterations = opt.iterations;
  if (!opt.converged) result.message += "optimizer did not reach the gradient tolerance; ";
  if (opt.weak) result.message += "weak convergence: objective flat to rounding, gradient above tolerance; ";
  if (options.point_only) {
    no_covariance(result);
    return result;
  }
  try {
    covariance_from_information(result, -numerical_hessian(objective, opt.maximizer));
  } catch (const EvaluationError& e) {
    result.converged = false;
    result.message += std::string(e.what()) + "; ";
    no_covariance(result);
  }
  return result;
}

FitResult fit_naive(const Dataset& data, const ModelSpec& spec, const FitOptions& options) {
  FitResult result = fit_beta_regression(data, as_span(data.w()), spec, options);
  result.method = Method::naive;
  return result;
}

FitResult fit_rc(const Dataset& data, const MeasurementSpec& meas, const ModelSpec& spec, int n_boot,
                 std::uint64_t seed, const FitOptions& options) {
  if (n_boot < 0) throw DomainError("fit_rc: n_boot must be nonnegative");
  const DeltaParams delta = calibration_nuisance_estimate(data, meas);
  Eigen::VectorXd x_tilde(data.size());
  for (Eigen::Index t = 0; t < data.size(); ++t) x_tilde[t] = conditional_moments(data.w()[t], delta, meas).mean;

  FitOptions inner = options;
  inner.point_only = options.point_only || n_boot > 0;
  FitResult result = fit_beta_regression(data, as_span(x_tilde), spec, inner);
  result.method = Method::rc;
  result.delta = delta;
  if (options.point_only || n_boot == 0) return result;

  // Parametric bootstrap from the fitted calibration model.
  const Eigen::Index n = data.size();
  const Eigen::Index k = result.estimates.size();
  const double s2e = meas.error_variance(delta.sigma2_x);
  Eigen::MatrixXd draws(n_boot, k);
  std::vector<char> ok(n_boot, 0);
  FitOptions replicate_options = options;
  replicate_options.point_only = true;

#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < n_boot; ++b) {
    try {
      Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(b));
      Eigen::VectorXd y(n), w(n);
      for (Eigen::Index t = 0; t < n; ++t) {
        const double x = rng.normal(delta.mu_x, delta.sigma2_x);
        const double e = std::sqrt(s2e) * rng.normal();
        w[t] = meas.tau0() + meas.tau1() * x + e;
        y[t] = rng.beta(mu_t(result.theta, data.z().row(t), x, spec.mean_link),
                        phi_t(result.theta, data.v().row(t), x, spec.precision_link));
      }
      const Dataset replicate = Dataset::create(std::move(y), data.z(), data.v(), std::move(w));
      const FitResult refit = fit_rc(replicate, meas, spec, 0, 0, replicate_options);
      if (refit.converged && refit.estimates.allFinite()) {
        draws.row(b) = refit.estimates.transpose();
        ok[b] = 1;
      }
    } catch (const std::exception&) {
      ok[b] = 0;
    }
  }

  std::vector<Eigen::Index> used;
  for (int b = 0; b < n_boot; ++b)
    if (ok[b]) used.push_back(b);
  result.n_boot = static_cast<int>(used.size());
  result.covariance_source = CovarianceSource::parametric_bootstrap;
  if (used.size() < 2) {
    result.converged = false;
    result.message += "fewer than two bootstrap replicates converged; ";
    no_covariance(result);
    return result;
  }
  Eigen::MatrixXd kept(used.size(), k);
  for (std::size_t i = 0; i < used.size(); ++i) kept.row(i) = draws.row(used[i]);
  const Eigen::RowVectorXd centre = kept.colwise().mean();
  const Eigen::MatrixXd centred = kept.rowwise() - centre;
  set_covariance(result, centred.transpose() * centred / static_cast<double>(used.size() - 1));
  return result;
}

SandwichParts pseudo_likelihood_sandwich_parts(const Dataset& data, const ThetaParams& theta,
                                               const DeltaParams& delta_hat, const MeasurementSpec& meas,
                                               const HermiteRule& rule, const ModelSpec& spec,
                                               NuisanceInformation which) {
  const Eigen::Index pa = data.mean_columns();
  const Eigen::Index pg = data.precision_columns();
  const Eigen::Index k = ThetaParams::packed_size(pa, pg, spec);

  const Objective joint = [&](const Eigen::VectorXd& u) {
    return guarded([&] {
      return loglik_approx(data, ThetaParams::unpack(u.head(k), pa, pg, spec), DeltaParams{u[k], u[k + 1]}, meas,
                           rule, spec)
          .value;
    });
  };
  Eigen::VectorXd u(k + 2);
  u.head(k) = theta.pack(spec);
  u[k] = delta_hat.mu_x;
  u[k + 1] = delta_hat.sigma2_x;
  const Eigen::MatrixXd hess = numerical_hessian(joint, u);

  SandwichParts parts;
  parts.info_theta_theta = -hess.topLeftCorner(k, k);
  parts.info_theta_delta = -hess.topRightCorner(k, 2);
  Eigen::Vector2d delta_vec(delta_hat.mu_x, delta_hat.sigma2_x);
  if (which == NuisanceInformation::pseudo) {
    parts.info_delta_delta = -hess.bottomRightCorner(2, 2);
  } else {
    const Objective reduced = [&](const Eigen::VectorXd& d) {
      return guarded([&] { return loglik_w_marginal(data, DeltaParams{d[0], d[1]}, meas).value; });
    };
    parts.info_delta_delta = -numerical_hessian(reduced, delta_vec);
  }

  // per-observation scores of l_rt by central differences
  const Eigen::Index n = data.size();
  Eigen::MatrixXd scores(n, 2);
  const double step = std::cbrt(std::numeric_limits<double>::epsilon());
  for (int i = 0; i < 2; ++i) {
    const double h = step * std::max(1.0, std::fabs(delta_vec[i]));
    Eigen::Vector2d up = delta_vec, down = delta_vec;
    up[i] += h;
    down[i] -= h;
    const LoglikValue lu = loglik_w_marginal(data, DeltaParams{up[0], up[1]}, meas);
    const LoglikValue ld = loglik_w_marginal(data, DeltaParams{down[0], down[1]}, meas);
    for (Eigen::Index t = 0; t < n; ++t) scores(t, i) = (lu.terms[t] - ld.terms[t]) / (2.0 * h);
  }
  parts.score_outer_delta = scores.transpose() * scores;
  return parts;
}

Eigen::MatrixXd sandwich_covariance(const SandwichParts& parts) {
  const Eigen::MatrixXd inv_tt = safe_inverse(parts.info_theta_theta);
  const Eigen::MatrixXd inv_dd = safe_inverse(parts.info_delta_delta);
  const Eigen::MatrixXd bridge = inv_tt * parts.info_theta_delta * inv_dd;
  const Eigen::MatrixXd sigma = inv_tt + bridge * parts.score_outer_delta * bridge.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

FitResult fit_mpl(const Dataset& data, const MeasurementSpec& meas, const ModelSpec& spec, const HermiteRule& rule,
                  const FitOptions& options) {
  const DeltaParams delta_hat = reduced_likelihood_estimate(data, meas);
  const Eigen::Index pa = data.mean_columns();
  const Eigen::Index pg = data.precision_columns();

  FitOptions start_options = options;
  start_options.point_only = true;
  const FitResult start = fit_naive(data, spec, start_options);

  const Objective objective = [&](const Eigen::VectorXd& packed) {
    return guarded([&] {
      return loglik_pseudo(data, ThetaParams::unpack(packed, pa, pg, spec), delta_hat, meas, rule, spec).value;
    });
  };
  const OptimResult opt = maximize(objective, start.estimates, options.optim);

  FitResult result;
  result.method = Method::mpl;
  result.theta = ThetaParams::unpack(opt.maximizer, pa, pg, spec);
  result.delta = delta_hat;
  result.names = ThetaParams::names(pa, pg, spec);
  result.estimates = opt.maximizer;
  result.loglik = loglik_pseudo(data, result.theta, delta_hat, meas, rule, spec).value;
  result.converged = opt.converged;
  result.iterations = opt.iterations;
  result.covariance_source = CovarianceSource::sandwich;
  if (!opt.converged) result.message += "optimizer did not reach the gradient tolerance; ";
  if (opt.weak) result.message += "weak convergence: objective flat to rounding, gradient above tolerance; ";
  if (options.point_only) {
    no_covariance(result);
    return result;
  }
  try {
    const SandwichParts parts =
        pseudo_likelihood_sandwich_parts(data, result.theta, delta_hat, meas, rule, spec, options.nuisance_information);
    Eigen::LLT<Eigen::MatrixXd> llt(parts.info_theta_theta);
    if (llt.info() != Eigen::Success || !parts.info_theta_theta.allFinite()) {
      result.converged = false;
      result.message += "observed information is not positive definite; ";
    }
    set_covariance(result, sandwich_covariance(parts));
  } catch (const EvaluationError& e) {
    result.converged = false;
    result.message += std::string(e.what()) + "; ";
    no_covariance(result);
  }
  return result;
}

FitResult fit_aml(const Dataset& data, const MeasurementSpec& meas, const ModelSpec& spec, const HermiteRule& rule,
                  const FitOptions& options) {
  const Eigen::Index pa = data.mean_columns();
  const Eigen::Index pg = data.precision_columns();
  const Eigen::Index k = ThetaParams::packed_size(pa, pg, spec);

  FitOptions start_options = options;
  start_options.point_only = true;
  const FitResult naive = fit_naive(data, spec, start_options);

  // optimised over (theta, mu_x, log s2_x)
  const Objective transformed = [&](const Eigen::VectorXd& u) {
    return guarded([&] {
      return loglik_approx(data, ThetaParams::unpack(u.head(k), pa, pg, spec), DeltaParams{u[k], std::exp(u[k + 1])},
                           meas, rule, spec)
          .value;
    });
  };
  const Objective original = [&](const Eigen::VectorXd& u) {
    return guarded([&] {
      return loglik_approx(data, ThetaParams::unpack(u.head(k), pa, pg, spec), DeltaParams{u[k], u[k + 1]}, meas,
                           rule, spec)
          .value;
    });
  };

  const double n = static_cast<double>(data.size());
  const double wbar = data.w().mean();
  const double s2n = (data.w().array() - wbar).square().sum() / n;
  const double perturbed_s2x = 0.5 * s2n / (meas.tau1() * meas.tau1());

  std::vector<DeltaParams> starts;
  try {
    starts.push_back(reduced_likelihood_estimate(data, meas));
  } catch (const InfeasibleError&) {
  }
  if (perturbed_s2x > 0.0) starts.push_back({(wbar - meas.tau0()) / meas.tau1(), perturbed_s2x});
  if (starts.size() > 2) starts.resize(2);

  std::optional<OptimResult> opt;
  for (const DeltaParams& d0 : starts) {
    Eigen::VectorXd u0(k + 2);
    u0.head(k) = naive.estimates;
    u0[k] = d0.mu_x;
    u0[k + 1] = std::log(d0.sigma2_x);
    if (!std::isfinite(transformed(u0))) continue;
    try {
      opt = maximize(transformed, u0, options.optim);
      break;
    } catch (const EvaluationError&) {
    }
  }
  if (!opt) throw InfeasibleError("fit_aml: no feasible starting point for the joint likelihood");

  FitResult result;
  result.method = Method::aml;
  result.theta = ThetaParams::unpack(opt->maximizer.head(k), pa, pg, spec);
  const DeltaParams delta{opt->maximizer[k], std::exp(opt->maximizer[k + 1])};
  result.delta = delta;
  result.names = ThetaParams::names(pa, pg, spec);
  result.names.emplace_back("mu_x");
  result.names.emplace_back("sigma2_x");
  result.estimates.resize(k + 2);
  result.estimates.head(k) = opt->maximizer.head(k);
  result.estimates[k] = delta.mu_x;
  result.estimates[k + 1] = delta.sigma2_x;
  result.loglik = loglik_approx(data, result.theta, delta, meas, rule, spec).value;
  result.converged = opt->converged;
  result.iterations = opt->iterations;
  if (!opt->converged) result.message += "optimizer did not reach the gradient tolerance; ";
  if (opt->weak) result.message += "weak convergence: objective flat to rounding, gradient above tolerance; ";
  if (options.point_only) {
    no_covariance(result);
    return result;
  }
  try {
    covariance_from_information(result, -numerical_hessian(original, result.estimates));
  } catch (const EvaluationError& e) {
    result.converged = false;
    result.message += std::string(e.what()) + "; ";
    no_covariance(result);
  }
  return result;
}

FitResult fit(Method method, const Dataset& data, const MeasurementSpec& meas, const ModelSpec& spec,
              const FitOptions& options) {
  switch (method) {
    case Method::naive: return fit_naive(data, spec, options);
    case Method::rc: return fit_rc(data, meas, spec, options.n_boot, options.seed, options);
    case Method::mpl: return fit_mpl(data, meas, spec, hermite_rule(options.quad_points), options);
    case Method::aml: return fit_aml(data, meas, spec, hermite_rule(options.quad_points), options);
  }
  throw DomainError("fit: unknown method");
}

std::pair<double, double> wald_interval(double estimate, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("wald_interval: level must lie in (0,1)");
  const double half_width = normal_quantile(0.5 * (1.0 + level)) * se;
  return {estimate - half_width, estimate + half_width};
}

double wald_p_value(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

}  // namespace eivbeta
