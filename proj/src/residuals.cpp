#include "eivbeta/residuals.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eivbeta/error.hpp"
#include "eivbeta/random.hpp"
#include "eivbeta/special.hpp"

namespace eivbeta {
namespace {

struct Weighted {
  Eigen::VectorXd mu, phi, x;
  Eigen::MatrixXd sw;  // (Phi M)^{1/2} W
};

Weighted weighted_design(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                         const ModelSpec& spec, CovariatePlugIn plug_in) {
  const Eigen::Index n = data.size();
  const Eigen::Index pa = data.mean_columns();
  Weighted out;
  out.x = plug_in_covariate(data, fit, meas, plug_in);
  out.mu.resize(n);
  out.phi.resize(n);
  out.sw.resize(n, pa + 1);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double mu = mu_t(fit.theta, data.z().row(t), out.x[t], spec.mean_link);
    const double phi = phi_t(fit.theta, data.v().row(t), out.x[t], spec.precision_link);
    const double upsilon = trigamma(mu * phi) + trigamma((1.0 - mu) * phi);
    const double deriv = spec.mean_link.derivative(mu);
    const double m = phi * upsilon / (deriv * deriv);
    const double s = std::sqrt(phi * m);
    out.mu[t] = mu;
    out.phi[t] = phi;
    out.sw.row(t).head(pa) = s * data.z().row(t);
    out.sw(t, pa) = s * data.w()[t];
  }
  return out;
}

// Cholesky factor of W' Phi M W, with a pivoted QR to name the culprits when
// it is singular.
Eigen::LLT<Eigen::MatrixXd> cross_product_factor(const Eigen::MatrixXd& sw) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw);
  qr.setThreshold(1e-10);
  if (qr.rank() < sw.cols()) {
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < sw.cols(); ++i) {
      const Eigen::Index c = perm[i];
      if (!cols.empty()) cols += ", ";
      cols += c + 1 == sw.cols() ? std::string("w") : "z" + std::to_string(c);
    }
    throw RankDeficiencyError("W' Phi M W is singular; linearly dependent column(s): " + cols);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sw.transpose() * sw);
  if (llt.info() != Eigen::Success) throw RankDeficiencyError("W' Phi M W is not positive definite");
  return llt;
}

}  // namespace

Eigen::VectorXd plug_in_covariate(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                                  CovariatePlugIn plug_in) {
  if (plug_in == CovariatePlugIn::surrogate || !fit.delta) return data.w();
  Eigen::VectorXd x(data.size());
  for (Eigen::Index t = 0; t < data.size(); ++t) x[t] = conditional_moments(data.w()[t], *fit.delta, meas).mean;
  return x;
}

Eigen::MatrixXd weighted_hat_matrix(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                                    const ModelSpec& spec, CovariatePlugIn plug_in) {
  const Weighted wd = weighted_design(data, fit, meas, spec, plug_in);
  const auto llt = cross_product_factor(wd.sw);
  const Eigen::MatrixXd h = wd.sw * llt.solve(wd.sw.transpose());
  return 0.5 * (h + h.transpose());
}

ResidualReport weighted_residuals(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                                  const ModelSpec& spec, CovariatePlugIn plug_in) {
  if (!fit.theta.finite()) throw DomainError("weighted_residuals: fit has non-finite estimates");
  const Eigen::Index n = data.size();
  const Weighted wd = weighted_design(data, fit, meas, spec, plug_in);
  const auto llt = cross_product_factor(wd.sw);
  // h_tt = row_t A^{-1} row_t' through the triangular factor
  const Eigen::MatrixXd half = llt.matrixL().solve(wd.sw.transpose());

  ResidualReport report;
  report.r.resize(n);
  report.h_star_diag.resize(n);
  report.x_predicted = wd.x;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double mu = wd.mu[t];
    const double phi = wd.phi[t];
    const double a = mu * phi;
    const double b = (1.0 - mu) * phi;
    const double ystar = std::log(data.y()[t]) - std::log1p(-data.y()[t]);
    const double mustar = digamma(a) - digamma(b);
    const double upsilon = trigamma(a) + trigamma(b);
    const double h = half.col(t).squaredNorm();
    report.h_star_diag[t] = h;
    report.r[t] = (ystar - mustar) / std::sqrt(upsilon * (1.0 - h));
  }
  return report;
}

Eigen::VectorXd envelope_replicate_response(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                                            const ModelSpec& spec, std::uint64_t seed, int index,
                                            CovariatePlugIn plug_in) {
  const Eigen::VectorXd x = plug_in_covariate(data, fit, meas, plug_in);
  Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(index));
  Eigen::VectorXd y(data.size());
  for (Eigen::Index t = 0; t < data.size(); ++t) {
    y[t] = rng.beta(mu_t(fit.theta, data.z().row(t), x[t], spec.mean_link),
                    phi_t(fit.theta, data.v().row(t), x[t], spec.precision_link));
  }
  return y;
}

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DomainError("sorted_quantile: no values");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Envelope simulated_envelope(const Dataset& data, const FitResult& fit, const MeasurementSpec& meas,
                            const ModelSpec& spec, int n_sim, double level, std::uint64_t seed,
                            const FitOptions& refit_options, CovariatePlugIn plug_in, bool refit) {
  if (!(level > 0.0 && level <= 1.0)) throw DomainError("simulated_envelope: level must lie in (0,1]");
  if (n_sim < 19) throw DomainError("simulated_envelope: n_sim must be at least 19");
  const Eigen::Index n = data.size();
  FitOptions options = refit_options;
  options.point_only = true;

  std::vector<std::vector<double>> sorted(n_sim);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_sim; ++i) {
    try {
      const Dataset replicate =
          data.with_response(envelope_replicate_response(data, fit, meas, spec, seed, i, plug_in));
      const FitResult refitted = refit ? eivbeta::fit(fit.method, replicate, meas, spec, options) : fit;
      if (refit && !refitted.converged) continue;
      const ResidualReport rep = weighted_residuals(replicate, refitted, meas, spec, plug_in);
      if (!rep.r.allFinite()) continue;
      std::vector<double> r(rep.r.data(), rep.r.data() + n);
      std::sort(r.begin(), r.end());
      sorted[i] = std::move(r);
    } catch (const std::exception&) {
    }
  }

  std::vector<const std::vector<double>*> used;
  for (const auto& s : sorted)
    if (!s.empty()) used.push_back(&s);
  if (used.size() < 2) throw DomainError("simulated_envelope: fewer than two replicates could be refitted");

  Envelope env;
  env.level = level;
  env.n_sim = static_cast<int>(used.size());
  env.lower.resize(n);
  env.upper.resize(n);
  std::vector<double> column(used.size());
  for (Eigen::Index t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < used.size(); ++i) column[i] = (*used[i])[t];
    std::sort(column.begin(), column.end());
    env.lower[t] = sorted_quantile(column, 0.5 * (1.0 - level));
    env.upper[t] = sorted_quantile(column, 0.5 * (1.0 + level));
  }
  return env;
}

}  // namespace eivbeta
