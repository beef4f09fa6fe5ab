// Acceptance suite: one PASS/FAIL line per criterion.
//
//   eivbeta_acceptance            run every criterion
//   eivbeta_acceptance 2 8 11     run a subset
//
// Exit status is the number of failed criteria.

#include <omp.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracle.hpp"
#include "eivbeta/cli.hpp"
#include "eivbeta/estimators.hpp"
#include "eivbeta/likelihood.hpp"
#include "eivbeta/quadrature.hpp"
#include "eivbeta/residuals.hpp"
#include "eivbeta/simulate.hpp"

using namespace eivbeta;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Reference bias cells are reported as truth - estimate (naive beta shows
// -0.17 under attenuation of a negative slope), so they are compared against
// the negated bias of the report, whose bias is estimate - truth.
double reference_scale(const McCell& c) { return -c.bias; }

// Monte Carlo runs shared between criteria.
std::map<std::string, McReport>& mc_cache() {
  static std::map<std::string, McReport> cache;
  return cache;
}

const McReport& constant_kx075(int n) {
  const std::string key = "const075_" + std::to_string(n);
  auto& cache = mc_cache();
  if (!cache.count(key)) {
    SimDesign d = SimDesign::standard(false, 0.75, n);
    d.n_reps = 500;
    d.seed = 20240501;
    d.n_boot = 0;  // only bias is read from the regression calibration rows
    cache.emplace(key, run_monte_carlo(d, {Method::naive, Method::aml, Method::rc}));
  }
  return cache.at(key);
}

// 1 ---------------------------------------------------------------------------
Outcome quadrature_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int checked = 0;
  for (int q = 1; q <= 50; ++q) {
    const HermiteRule rule = compute_hermite_rule(q);
    for (int k = 0; k <= 2 * q - 1; ++k) {
      const double got = rule.integrate([k](double x) { return std::pow(x, k); });
      // even moments Gamma((k+1)/2); odd moments vanish, measured against
      // the integral of |x|^k
      const double scale = std::tgamma((k + 1) / 2.0);
      const double want = k % 2 ? 0.0 : scale;
      worst = std::max(worst, std::fabs(got - want) / scale);
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 1.0, std::to_string(checked) + " moments, max relative error " +
                                           fmt("%.2e", worst) + ", " + fmt("%.3f", secs) + " s"};
}

// 2 ---------------------------------------------------------------------------
Outcome likelihood_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double kxs[] = {0.5, 0.75, 0.95};
  double worst_const = 0.0, worst_vary = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const bool varying = inst % 2 == 1;
    const int n = 5 + inst % 6;
    SimDesign d = SimDesign::standard(varying, kxs[inst % 3], n);
    d.seed = 500 + inst;
    d.theta_true.alpha[0] += 0.4 * (u(gen) - 0.5);
    d.theta_true.beta += 0.2 * (u(gen) - 0.5);
    d.theta_true.gamma[0] += 0.4 * (u(gen) - 0.5);
    if (varying) d.theta_true.lambda += 0.2 * (u(gen) - 0.5);
    d.delta_true.mu_x += 0.4 * (u(gen) - 0.5);
    d.delta_true.sigma2_x *= 0.8 + 0.4 * u(gen);
    const Dataset data = simulate_dataset(d, 0);
    const auto got = loglik_approx(data, d.theta_true, d.delta_true, d.meas, hermite_rule(50), d.spec);
    const auto want = oracle::joint_terms(data, d.theta_true, d.delta_true, d.meas, d.spec);
    for (std::size_t t = 0; t < want.size(); ++t) {
      double& worst = varying ? worst_vary : worst_const;
      worst = std::max(worst, std::fabs(got.terms[t] - want[t]));
    }
  }
  const double secs = seconds_since(t0);
  return {std::max(worst_const, worst_vary) <= 1e-6 && secs < 10.0,
          "max |l_a term - adaptive integral|: constant precision " + fmt("%.2e", worst_const) +
              ", varying precision " + fmt("%.2e", worst_vary) + " (tolerance 1e-6), " + fmt("%.2f", secs) + " s"};
}

// 3 ---------------------------------------------------------------------------
Outcome error_free_collapse() {
  double worst = 0.0;
  for (int seed = 1; seed <= 10; ++seed) {
    SimDesign d = SimDesign::standard(seed % 2 == 0, 0.75, 200);
    d.meas = MeasurementSpec::from_error_variance(0.0, 1.0, 0.0);
    d.seed = 9000 + seed;
    const SimulatedSample s = simulate_sample(d, 0);
    FitOptions o;
    o.point_only = true;
    const auto& rule = hermite_rule(50);
    const Eigen::VectorXd x = s.x;
    std::vector<Eigen::VectorXd> est;
    est.push_back(fit_beta_regression(s.data, {x.data(), static_cast<std::size_t>(x.size())}, d.spec, o).estimates);
    est.push_back(fit_aml(s.data, d.meas, d.spec, rule, o).estimates);
    est.push_back(fit_mpl(s.data, d.meas, d.spec, rule, o).estimates);
    est.push_back(fit_rc(s.data, d.meas, d.spec, 0, 1, o).estimates);
    const Eigen::Index k = est[0].size();
    for (std::size_t a = 0; a < est.size(); ++a)
      for (std::size_t b = a + 1; b < est.size(); ++b)
        worst = std::max(worst, (est[a].head(k) - est[b].head(k)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-4, "max pairwise |theta difference| over 10 seeds: " + fmt("%.2e", worst)};
}

// 4 ---------------------------------------------------------------------------
Outcome point_estimates() {
  const McReport& r = constant_kx075(100);
  struct Check {
    Method m;
    const char* p;
    double target, tol;
  };
  const Check checks[] = {{Method::naive, "alpha", 0.47, 0.05},
                          {Method::naive, "beta", -0.17, 0.03},
                          {Method::aml, "alpha", -0.02, 0.04},
                          {Method::aml, "beta", 0.01, 0.02}};
  bool pass = true;
  std::string detail = "truth - mean estimate:";
  for (const auto& c : checks) {
    const double got = reference_scale(r.cell(c.m, c.p));
    pass = pass && std::fabs(got - c.target) <= c.tol;
    detail += std::string(" ") + std::string(method_name(c.m)) + "/" + c.p + " " + fmt("%.3f", got) + " (" +
              fmt("%.2f", c.target) + ")";
  }
  return {pass, detail + ", failures naive " + std::to_string(r.failures(Method::naive)) + " aml " +
                    std::to_string(r.failures(Method::aml))};
}

// 5 ---------------------------------------------------------------------------
Outcome coverage() {
  SimDesign d = SimDesign::standard(false, 0.95, 200);
  d.n_reps = 1000;
  d.seed = 20240502;
  const McReport r = run_monte_carlo(d, {Method::naive, Method::aml});
  const double ca = 100 * r.cell(Method::aml, "alpha").coverage;
  const double cb = 100 * r.cell(Method::aml, "beta").coverage;
  const double cn = 100 * r.cell(Method::naive, "beta").coverage;
  const bool pass = std::fabs(ca - 94.78) <= 2.5 && std::fabs(cb - 94.84) <= 2.5 && cn <= 55.0;
  // diagnostic only: the same naive cell with sigma2_e = sigma2_x / 10, the
  // error variance that kx 0.95 is sometimes quoted as (it is kx 10/11)
  SimDesign d10 = d;
  d10.meas = MeasurementSpec::from_error_variance(0.0, 1.0, d.delta_true.sigma2_x / 10);
  const double cn10 = 100 * run_monte_carlo(d10, {Method::naive}).cell(Method::naive, "beta").coverage;
  return {pass, "aml coverage alpha " + fmt("%.2f", ca) + "% (94.78), beta " + fmt("%.2f", cb) +
                    "% (94.84); naive beta " + fmt("%.2f", cn) + "% (<= 55, reference 45.10; " + fmt("%.2f", cn10) +
                    "% at sigma2_e = sigma2_x/10); failures aml " + std::to_string(r.failures(Method::aml))};
}

// 6 ---------------------------------------------------------------------------
Outcome varying_precision() {
  SimDesign d = SimDesign::standard(true, 0.95, 100);
  d.n_reps = 500;
  d.seed = 20240503;
  const McReport r = run_monte_carlo(d, {Method::mpl});
  const std::pair<const char*, double> targets[] = {{"alpha", 0.0}, {"beta", 0.0}, {"gamma", -0.07}, {"lambda", 0.0}};
  bool pass = true;
  std::string detail = "mpl truth - mean estimate:";
  for (const auto& [p, target] : targets) {
    const double got = reference_scale(r.cell(Method::mpl, p));
    pass = pass && std::fabs(got - target) <= 0.05;
    detail += std::string(" ") + p + " " + fmt("%.3f", got) + " (" + fmt("%.2f", target) + ")";
  }
  return {pass, detail + ", failures " + std::to_string(r.failures(Method::mpl))};
}

// 7 ---------------------------------------------------------------------------
Outcome precision_column() {
  const McReport& r100 = constant_kx075(100);
  const McReport& r300 = constant_kx075(300);
  auto bias = [](const McReport& r, Method m) { return r.cell(m, "gamma").bias; };
  const double n100 = bias(r100, Method::naive), n300 = bias(r300, Method::naive);
  const double c100 = bias(r100, Method::rc), c300 = bias(r300, Method::rc);
  const double a100 = bias(r100, Method::aml), a300 = bias(r300, Method::aml);
  const bool pass = std::fabs(n300) >= 0.8 * std::fabs(n100) && std::fabs(c300) >= 0.8 * std::fabs(c100) &&
                    std::fabs(a300) <= 0.6 * std::fabs(a100);
  return {pass, "gamma bias (estimate - truth) n=100 -> n=300: naive " + fmt("%.3f", n100) + " -> " +
                    fmt("%.3f", n300) + ", rc " + fmt("%.3f", c100) + " -> " + fmt("%.3f", c300) + ", aml " +
                    fmt("%.3f", a100) + " -> " + fmt("%.3f", a300)};
}

// 8 ---------------------------------------------------------------------------
Outcome sandwich_structure() {
  SimDesign d = SimDesign::standard(true, 0.75, 200);
  d.seed = 77;
  const Dataset data = simulate_dataset(d, 0);
  const auto& rule = hermite_rule(50);
  FitOptions o;
  o.point_only = true;
  const FitResult f = fit_mpl(data, d.meas, d.spec, rule, o);
  SandwichParts parts = pseudo_likelihood_sandwich_parts(data, f.theta, *f.delta, d.meas, rule, d.spec);
  const Eigen::MatrixXd inv_tt = parts.info_theta_theta.inverse();
  const Eigen::MatrixXd full = sandwich_covariance(parts);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(full - inv_tt);
  const double min_eig = es.eigenvalues().minCoeff();
  parts.info_theta_delta.setZero();
  const double collapse = (sandwich_covariance(parts) - inv_tt).cwiseAbs().maxCoeff();
  return {collapse <= 1e-10 && min_eig >= -1e-8,
          "zeroed cross information: max |Sigma - I_tt^-1| " + fmt("%.2e", collapse) +
              "; smallest eigenvalue of the correction " + fmt("%.3e", min_eig)};
}

// 9 ---------------------------------------------------------------------------
Outcome hat_matrix() {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const Method methods[] = {Method::naive, Method::mpl, Method::aml, Method::rc};
  double sym = 0, idem = 0, trace_err = 0, diag_lo = 1, diag_hi = 0;
  for (int inst = 0; inst < 10; ++inst) {
    const int n = 30 + static_cast<int>(170 * u(gen));
    SimDesign d = SimDesign::standard(inst % 2 == 0, 0.6 + 0.35 * u(gen), n);
    d.seed = 300 + inst;
    const Dataset base = simulate_dataset(d, 0);
    const int extra = inst % 3 == 0 ? 1 : 0;
    Eigen::MatrixXd zmat(n, 1 + extra);
    zmat.col(0).setOnes();
    for (int t = 0; t < n && extra; ++t) zmat(t, 1) = z(gen);
    const Dataset data = Dataset::create(base.y(), zmat, base.v(), base.w());
    FitOptions o;
    o.point_only = true;
    const FitResult f = fit(methods[inst % 4], data, d.meas, d.spec, o);
    const Eigen::MatrixXd h = weighted_hat_matrix(data, f, d.meas, d.spec);
    sym = std::max(sym, (h - h.transpose()).cwiseAbs().maxCoeff());
    idem = std::max(idem, (h * h - h).cwiseAbs().maxCoeff());
    trace_err = std::max(trace_err, std::fabs(h.trace() - (zmat.cols() + 1)));
    const ResidualReport rep = weighted_residuals(data, f, d.meas, d.spec);
    diag_lo = std::min(diag_lo, rep.h_star_diag.minCoeff());
    diag_hi = std::max(diag_hi, rep.h_star_diag.maxCoeff());
  }
  return {sym <= 1e-10 && idem <= 1e-8 && trace_err <= 1e-6 && diag_lo >= 0 && diag_hi <= 1,
          "symmetry " + fmt("%.1e", sym) + ", idempotency " + fmt("%.1e", idem) + ", trace " + fmt("%.1e", trace_err) +
              ", diagonal in [" + fmt("%.4f", diag_lo) + ", " + fmt("%.4f", diag_hi) + "]"};
}

// 10 --------------------------------------------------------------------------
Outcome derivatives() {
  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  SimDesign d = SimDesign::standard(true, 0.75, 50);
  d.seed = 1010;
  const Dataset data = simulate_dataset(d, 0);
  const auto& rule = hermite_rule(50);
  const Eigen::Index k = 4;
  const Objective la = [&](const Eigen::VectorXd& p) {
    return loglik_approx(data, ThetaParams::unpack(p.head(k), 1, 1, d.spec), DeltaParams{p[k], p[k + 1]}, d.meas,
                         rule, d.spec)
        .value;
  };
  // moderate precision: at phi in the hundreds the fixed 50-node rule aliases
  // and l_a picks up wiggles on the scale of the difference steps
  double lo = INFINITY, hi = -INFINITY;
  for (int point = 0; point < 5; ++point) {
    Eigen::VectorXd p(k + 2);
    p << 2.0 + u(gen), -0.6 + 0.4 * u(gen), 2.5 + u(gen), 0.1 + 0.2 * u(gen), 2.5 + u(gen), 2.7 * (1 + u(gen));
    // differences of successive step-halved central differences shrink by 4
    const Eigen::VectorXd g1 = numerical_gradient(la, p, 0.02);
    const Eigen::VectorXd g2 = numerical_gradient(la, p, 0.01);
    const Eigen::VectorXd g3 = numerical_gradient(la, p, 0.005);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double ratio = (g1[i] - g2[i]) / (g2[i] - g3[i]);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  FitOptions o;
  o.point_only = true;
  const FitResult f = fit_aml(data, d.meas, d.spec, rule, o);
  const Eigen::MatrixXd hess = numerical_hessian(la, f.estimates);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  const double max_eig = es.eigenvalues().maxCoeff();
  return {lo >= 3 && hi <= 5 && f.converged && max_eig < 0,
          "Richardson ratios in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]; largest Hessian eigenvalue at the " +
              (f.converged ? std::string("converged") : std::string("UNCONVERGED")) + " optimum " +
              fmt("%.3e", max_eig)};
}

// 11 --------------------------------------------------------------------------
Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("eivbeta_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path design = dir / "design.json";
  {
    std::ofstream out(design);
    out << R"({"n": [40, 60], "kx": 0.8, "n_reps": 6, "n_boot": 20, "precision_varying": true})";
  }
  auto run = [&](const std::string& out, int threads) {
    const std::string t = std::to_string(threads);
    const std::string path = (dir / out).string();
    const char* argv[] = {"eivbeta", "mc",  "--design", design.c_str(), "--method", "all",
                          "--seed",  "123", "--out",    path.c_str(),   "--threads", t.c_str()};
    std::ostringstream o, e;
    const int code = cli::run_cli(12, argv, o, e);
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return std::make_pair(code, s.str());
  };
  const auto a = run("a.csv", 1);
  const auto b = run("b.csv", 1);
  const auto c = run("c.csv", 4);
  omp_set_num_threads(omp_get_num_procs());
  fs::remove_all(dir);
  const bool pass = a.first == 0 && b.first == 0 && c.first == 0 && a.second == b.second && a.second == c.second &&
                    !a.second.empty();
  return {pass, "two 1-thread runs and one 4-thread run: " +
                    std::string(a.second == b.second && a.second == c.second ? "byte-identical" : "DIFFER") + " (" +
                    std::to_string(a.second.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"quadrature exactness", quadrature_exactness},
      {"likelihood oracle equivalence", likelihood_oracle},
      {"error-free collapse", error_free_collapse},
      {"reference point estimates (constant precision, kx 0.75, n 100)", point_estimates},
      {"reference coverage (constant precision, kx 0.95, n 200)", coverage},
      {"varying-precision bias (kx 0.95, n 100)", varying_precision},
      {"precision-coefficient bias versus n", precision_column},
      {"sandwich covariance structure", sandwich_structure},
      {"hat-matrix algebra", hat_matrix},
      {"gradient and Hessian checks", derivatives},
      {"determinism of cmd_mc", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += out.pass ? 0 : 1;
    std::printf("%s criterion %2d  %s: %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first,
                out.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures;
}
