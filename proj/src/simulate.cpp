#include "eivbeta/simulate.hpp"

#include <omp.h>

#include <cmath>
#include <limits>
#include <optional>

#include "eivbeta/error.hpp"
#include "eivbeta/random.hpp"

namespace eivbeta {

SimDesign SimDesign::standard(bool precision_varying, double kx, int n) {
  SimDesign d;
  d.n = n;
  d.theta_true.alpha = Eigen::VectorXd::Constant(1, 2.0);
  d.theta_true.beta = -0.6;
  d.theta_true.gamma = Eigen::VectorXd::Constant(1, precision_varying ? 4.0 : 2.5);
  d.theta_true.lambda = precision_varying ? 0.5 : 0.0;
  d.delta_true = {2.5, 2.7};
  d.meas = MeasurementSpec::from_reliability(0.0, 1.0, kx);
  d.spec.x_in_precision = precision_varying;
  return d;
}

void SimDesign::validate() const {
  if (n < 5) throw DomainError("design: n must be at least 5");
  if (n_reps < 1) throw DomainError("design: n_reps must be at least 1");
  if (quad_points < 1 || quad_points > kMaxHermiteOrder) throw DomainError("design: quad_points out of range");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("design: level must lie in (0,1)");
  if (n_boot < 0) throw DomainError("design: n_boot must be nonnegative");
  if (theta_true.alpha.size() != 1 || theta_true.gamma.size() != 1)
    throw DomainError("design: alpha and gamma must each hold one intercept");
  if (!theta_true.finite() || !std::isfinite(delta_true.mu_x) || !(delta_true.sigma2_x > 0.0) ||
      !std::isfinite(delta_true.sigma2_x))
    throw DomainError("design: parameters must be finite with sigma2_x > 0");
  if (!spec.x_in_precision && theta_true.lambda != 0.0)
    throw DomainError("design: lambda must be 0 when precision does not vary with x");
  const double s2e = meas.error_variance(delta_true.sigma2_x);
  if (!(s2e >= 0.0) || !std::isfinite(s2e)) throw DomainError("design: error variance must be nonnegative");
}

SimulatedSample simulate_sample(const SimDesign& design, std::uint64_t replicate_index) {
  design.validate();
  const Eigen::Index n = design.n;
  const double sd_e = std::sqrt(design.meas.error_variance(design.delta_true.sigma2_x));
  Rng rng = Rng::for_stream(design.seed, replicate_index);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd x(n), w(n), y(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    x[t] = rng.normal(design.delta_true.mu_x, design.delta_true.sigma2_x);
    const double e = sd_e * rng.normal();
    w[t] = design.meas.tau0() + design.meas.tau1() * x[t] + e;
    y[t] = rng.beta(mu_t(design.theta_true, ones.row(t), x[t], design.spec.mean_link),
                    phi_t(design.theta_true, ones.row(t), x[t], design.spec.precision_link));
  }
  return {Dataset::create(std::move(y), ones, ones, std::move(w)), std::move(x)};
}

Dataset simulate_dataset(const SimDesign& design, std::uint64_t replicate_index) {
  return simulate_sample(design, replicate_index).data;
}

const McCell& McReport::cell(Method method, const std::string& parameter) const {
  for (const McCell& c : cells)
    if (c.method == method && c.parameter == parameter) return c;
  throw DomainError("McReport: no cell for " + std::string(method_name(method)) + "/" + parameter);
}

int McReport::failures(Method method) const {
  for (std::size_t i = 0; i < methods.size(); ++i)
    if (methods[i] == method) return n_fail[i];
  throw DomainError("McReport: method not run: " + std::string(method_name(method)));
}

namespace {

struct MethodRecord {
  bool ok = false;
  Eigen::VectorXd estimate;
  std::vector<char> covered;
};

}  // namespace

McReport run_monte_carlo(const SimDesign& design, const std::vector<Method>& methods, int threads) {
  design.validate();
  if (methods.empty()) throw DomainError("run_monte_carlo: no methods requested");

  const Eigen::VectorXd truth = design.theta_true.pack(design.spec);
  const std::vector<std::string> names = ThetaParams::names(1, 1, design.spec);
  const Eigen::Index k = truth.size();
  const std::size_t m = methods.size();

  FitOptions options;
  options.quad_points = design.quad_points;
  options.n_boot = design.n_boot;

  std::vector<std::vector<MethodRecord>> records(design.n_reps, std::vector<MethodRecord>(m));
  const int n_threads = threads > 0 ? threads : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic) num_threads(n_threads)
  for (int rep = 0; rep < design.n_reps; ++rep) {
    std::optional<Dataset> data;
    try {
      data = simulate_dataset(design, static_cast<std::uint64_t>(rep));
    } catch (const std::exception&) {
      continue;
    }
    FitOptions local = options;
    local.seed = splitmix64(design.seed ^ splitmix64(~static_cast<std::uint64_t>(rep)));
    for (std::size_t j = 0; j < m; ++j) {
      MethodRecord& rec = records[rep][j];
      try {
        const FitResult f = fit(methods[j], *data, design.meas, design.spec, local);
        const Eigen::VectorXd est = f.estimates.head(k);
        const Eigen::VectorXd se = f.se.head(k);
        if (!f.converged || !est.allFinite() || !se.allFinite()) continue;
        rec.estimate = est;
        rec.covered.resize(k);
        for (Eigen::Index i = 0; i < k; ++i) {
          const auto [lo, hi] = wald_interval(est[i], se[i], design.level);
          rec.covered[i] = lo <= truth[i] && truth[i] <= hi;
        }
        rec.ok = true;
      } catch (const std::exception&) {
        rec.ok = false;
      }
    }
  }

  McReport report;
  report.kx = design.meas.reliability(design.delta_true.sigma2_x);
  report.n = design.n;
  report.n_reps = design.n_reps;
  report.level = design.level;
  report.seed = design.seed;
  report.rng_description = std::string(Rng::description());
  report.methods = methods;
  report.n_fail.assign(m, 0);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t j = 0; j < m; ++j) {
    int used = 0;
    for (int rep = 0; rep < design.n_reps; ++rep) used += records[rep][j].ok ? 1 : 0;
    report.n_fail[j] = design.n_reps - used;
    for (Eigen::Index i = 0; i < k; ++i) {
      double sum = 0.0, sum_sq = 0.0;
      int covered = 0;
      for (int rep = 0; rep < design.n_reps; ++rep) {
        const MethodRecord& rec = records[rep][j];
        if (!rec.ok) continue;
        const double err = rec.estimate[i] - truth[i];
        sum += err;
        sum_sq += err * err;
        covered += rec.covered[i];
      }
      McCell c;
      c.method = methods[j];
      c.parameter = names[i];
      c.truth = truth[i];
      c.n_used = used;
      if (used == 0) {
        c.bias = c.rmse = c.coverage = c.bias_se = nan;
      } else {
        c.bias = sum / used;
        c.rmse = std::max(std::sqrt(sum_sq / used), std::fabs(c.bias));
        c.coverage = static_cast<double>(covered) / used;
        if (used > 1) {
          const double var = std::max(0.0, (sum_sq - used * c.bias * c.bias) / (used - 1));
          c.bias_se = std::sqrt(var / used);
        } else {
          c.bias_se = nan;
        }
      }
      report.cells.push_back(c);
    }
  }
  return report;
}

}  // namespace eivbeta
