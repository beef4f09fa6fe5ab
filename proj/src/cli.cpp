#include "eivbeta/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "eivbeta/error.hpp"
#include "eivbeta/residuals.hpp"
#include "json.hpp"

namespace eivbeta::cli {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(trim(field));
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw DomainError(where + ": not a number: '" + text + "'");
  return value;
}

std::vector<Method> parse_methods(const std::string& text) {
  if (text == "all") return {Method::naive, Method::aml, Method::mpl, Method::rc};
  std::vector<Method> methods;
  for (const std::string& name : split(text, ',')) methods.push_back(method_from_name(name));
  if (methods.empty()) throw DomainError("--method: no method given");
  return methods;
}

ModelSpec model_spec(const RunConfig& config) {
  ModelSpec spec;
  spec.mean_link = MeanLink::from_name(config.link_mean);
  spec.precision_link = PrecisionLink::from_name(config.link_precision);
  spec.x_in_precision = config.x_in_precision;
  return spec;
}

std::optional<MeasurementSpec> resolve_measurement(const RunConfig& config) {
  if (!config.calibrate_from.empty()) {
    if (config.tau0 || config.tau1 || config.sigma2e || config.kx)
      throw DomainError("--calibrate-from cannot be combined with --tau0, --tau1, --sigma2e or --kx");
    return calibrate_measurement(read_csv(config.calibrate_from));
  }
  if (config.sigma2e && config.kx) throw DomainError("--sigma2e and --kx are mutually exclusive");
  const double tau0 = config.tau0.value_or(0.0);
  const double tau1 = config.tau1.value_or(1.0);
  if (config.sigma2e) return MeasurementSpec::from_error_variance(tau0, tau1, *config.sigma2e);
  if (config.kx) return MeasurementSpec::from_reliability(tau0, tau1, *config.kx);
  return std::nullopt;
}

MeasurementSpec require_measurement(const RunConfig& config, const std::vector<Method>& methods) {
  const auto meas = resolve_measurement(config);
  if (meas) return *meas;
  for (Method m : methods)
    if (m != Method::naive)
      throw DomainError("method " + std::string(method_name(m)) +
                        " needs the measurement model: give --sigma2e, --kx or --calibrate-from");
  return MeasurementSpec::from_error_variance(0.0, 1.0, 0.0);  // unused by the naive fit
}

FitOptions fit_options(const RunConfig& config) {
  FitOptions options;
  options.quad_points = config.quad_points.value_or(50);
  options.n_boot = config.n_boot.value_or(200);
  options.seed = config.seed.value_or(1);
  return options;
}

class OutputFile {
 public:
  OutputFile(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw DomainError("cannot open output file '" + path + "'");
      stream_ = &file_;
    }
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

Dataset load_dataset(const RunConfig& config) {
  if (config.input.empty()) throw DomainError("--input is required");
  return dataset_from_table(read_csv(config.input), config.no_intercept);
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return ec == std::errc() ? std::string(buffer, ptr) : std::string("nan");
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DomainError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DomainError(source + ": empty file");
  table.header = split(trim(line), ',');
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    if (fields.size() != table.header.size())
      throw DomainError(source + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, source + ":" + std::to_string(line_no)));
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

Dataset dataset_from_table(const CsvTable& table, bool no_intercept) {
  const std::size_t iy = table.column("y");
  const std::size_t iw = table.column("w");
  std::vector<std::size_t> zc, vc;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j].starts_with('z')) zc.push_back(j);
    if (table.header[j].starts_with('v')) vc.push_back(j);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  const Eigen::Index offset = no_intercept ? 0 : 1;
  const auto pz = offset + static_cast<Eigen::Index>(zc.size());
  const auto pv = offset + static_cast<Eigen::Index>(vc.size());
  if (pz == 0 || pv == 0) throw DomainError("with --no-intercept both z* and v* columns are needed");
  Eigen::VectorXd y(n), w(n);
  Eigen::MatrixXd z(n, pz), v(n, pv);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& row = table.rows[t];
    y[t] = row[iy];
    w[t] = row[iw];
    if (offset) z(t, 0) = v(t, 0) = 1.0;
    for (std::size_t j = 0; j < zc.size(); ++j) z(t, offset + j) = row[zc[j]];
    for (std::size_t j = 0; j < vc.size(); ++j) v(t, offset + j) = row[vc[j]];
  }
  return Dataset::create(std::move(y), std::move(z), std::move(v), std::move(w));
}

MeasurementSpec calibrate_measurement(const CsvTable& validation) {
  const std::size_t ix = validation.column("x");
  const std::size_t iw = validation.column("w");
  const auto m = static_cast<Eigen::Index>(validation.rows.size());
  if (m < 3) throw DomainError("--calibrate-from needs at least 3 validation rows");
  Eigen::MatrixXd design(m, 2);
  Eigen::VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = validation.rows[i][ix];
    w[i] = validation.rows[i][iw];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 2) throw DomainError("--calibrate-from: x is constant over the validation rows");
  const Eigen::VectorXd coef = qr.solve(w);
  const double rss = (w - design * coef).squaredNorm();
  return MeasurementSpec::from_error_variance(coef[0], coef[1], rss / static_cast<double>(m - 2));
}

std::vector<SimDesign> parse_design_json(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DomainError(std::string("design: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DomainError("design: top level must be an object");
  static const std::vector<std::string> known = {
      "n",     "kx",     "sigma2e",          "tau0",      "tau1",        "alpha",       "beta",
      "gamma", "lambda", "mu_x",             "sigma2_x",  "link_mean",   "link_precision",
      "n_reps", "quad_points", "seed", "level", "n_boot", "precision_varying"};
  for (const auto& [key, value] : doc.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw DomainError("design: unknown key '" + key + "'");

  try {
    auto number_list = [&](const char* key) {
      std::vector<double> out;
      const json& node = doc.at(key);
      if (node.is_array()) {
        for (const auto& v : node) out.push_back(v.get<double>());
      } else {
        out.push_back(node.get<double>());
      }
      if (out.empty()) throw DomainError(std::string("design: '") + key + "' is empty");
      return out;
    };
    const bool varying = doc.value("precision_varying", false);
    if (doc.contains("kx") == doc.contains("sigma2e"))
      throw DomainError("design: give exactly one of 'kx' and 'sigma2e'");
    const bool by_kx = doc.contains("kx");
    const std::vector<double> error_values = number_list(by_kx ? "kx" : "sigma2e");
    std::vector<int> ns;
    for (double v : number_list("n")) {
      if (v != std::floor(v)) throw DomainError("design: n must be an integer");
      ns.push_back(static_cast<int>(v));
    }

    std::vector<SimDesign> designs;
    for (double ev : error_values) {
      for (int n : ns) {
        SimDesign d = SimDesign::standard(varying, 0.75, n);
        const double tau0 = doc.value("tau0", 0.0);
        const double tau1 = doc.value("tau1", 1.0);
        d.meas = by_kx ? MeasurementSpec::from_reliability(tau0, tau1, ev)
                       : MeasurementSpec::from_error_variance(tau0, tau1, ev);
        d.theta_true.alpha[0] = doc.value("alpha", d.theta_true.alpha[0]);
        d.theta_true.beta = doc.value("beta", d.theta_true.beta);
        d.theta_true.gamma[0] = doc.value("gamma", d.theta_true.gamma[0]);
        d.theta_true.lambda = doc.value("lambda", d.theta_true.lambda);
        d.delta_true.mu_x = doc.value("mu_x", d.delta_true.mu_x);
        d.delta_true.sigma2_x = doc.value("sigma2_x", d.delta_true.sigma2_x);
        d.spec.mean_link = MeanLink::from_name(doc.value("link_mean", std::string("logit")));
        d.spec.precision_link = PrecisionLink::from_name(doc.value("link_precision", std::string("log")));
        d.n_reps = doc.value("n_reps", d.n_reps);
        d.quad_points = doc.value("quad_points", d.quad_points);
        d.seed = doc.value("seed", d.seed);
        d.level = doc.value("level", d.level);
        d.n_boot = doc.value("n_boot", d.n_boot);
        d.validate();
        designs.push_back(std::move(d));
      }
    }
    return designs;
  } catch (const json::exception& e) {
    throw DomainError(std::string("design: ") + e.what());
  }
}

void write_mc_csv(const std::vector<McReport>& reports, std::ostream& out) {
  out << "kx,n,method,parameter,bias,rmse,coverage,n_fail\n";
  for (const McReport& report : reports) {
    for (const McCell& c : report.cells) {
      out << format_double(report.kx) << ',' << report.n << ',' << method_name(c.method) << ',' << c.parameter
          << ',' << format_double(c.bias) << ',' << format_double(c.rmse) << ',' << format_double(c.coverage)
          << ',' << report.failures(c.method) << '\n';
    }
  }
}

int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const std::vector<Method> methods = parse_methods(config.method);
  const MeasurementSpec meas = require_measurement(config, methods);
  const ModelSpec spec = model_spec(config);
  const FitOptions options = fit_options(config);
  const Dataset data = load_dataset(config);

  OutputFile csv_file(config.output, out);
  const bool csv_to_stdout = config.output.empty();
  std::ostream& csv = csv_file.stream();
  csv << "method,parameter,estimate,se,z,p_value\n";

  bool all_converged = true;
  for (Method method : methods) {
    const FitResult result = fit(method, data, meas, spec, options);
    all_converged = all_converged && result.converged;
    if (!csv_to_stdout) {
      out << method_name(method) << ": loglik " << std::setprecision(10) << result.loglik << ", "
          << (result.converged ? "converged" : "NOT converged") << " in " << result.iterations
          << " iterations, covariance " << covariance_source_name(result.covariance_source);
      if (result.n_boot) out << " (" << *result.n_boot << " replicates)";
      out << '\n';
      out << "  " << std::left << std::setw(10) << "parameter" << std::right << std::setw(14) << "estimate"
          << std::setw(14) << "se" << std::setw(10) << "z" << std::setw(12) << "p-value" << '\n';
    }
    if (!result.converged) err << method_name(method) << ": " << result.message << '\n';
    for (std::size_t i = 0; i < result.names.size(); ++i) {
      const double est = result.estimates[i];
      const double se = result.se[i];
      const double z = est / se;
      const double p = wald_p_value(z);
      csv << method_name(method) << ',' << result.names[i] << ',' << format_double(est) << ','
          << format_double(se) << ',' << format_double(z) << ',' << format_double(p) << '\n';
      if (!csv_to_stdout) {
        out << "  " << std::left << std::setw(10) << result.names[i] << std::right << std::fixed
            << std::setprecision(4) << std::setw(14) << est << std::setw(14) << se << std::setw(10)
            << std::setprecision(2) << z << std::setw(12) << std::setprecision(4) << p << '\n'
            << std::defaultfloat;
      }
    }
  }
  return all_converged ? kExitOk : kExitNonConvergence;
}

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream&) {
  if (config.design.empty()) throw DomainError("--design is required");
  std::ifstream in(config.design);
  if (!in) throw DomainError("cannot open '" + config.design + "'");
  std::stringstream text;
  text << in.rdbuf();
  auto designs = parse_design_json(text.str());
  if (designs.size() != 1) throw DomainError("simulate needs a single design (scalar n and kx)");
  SimDesign& design = designs.front();
  if (config.seed) design.seed = *config.seed;

  const SimulatedSample sample = simulate_sample(design, config.replicate);
  OutputFile file(config.output, out);
  std::ostream& csv = file.stream();
  csv << "y,w,x\n";
  for (Eigen::Index t = 0; t < sample.data.size(); ++t)
    csv << format_double(sample.data.y()[t]) << ',' << format_double(sample.data.w()[t]) << ','
        << format_double(sample.x[t]) << '\n';
  return kExitOk;
}

int cmd_mc(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.design.empty()) throw DomainError("--design is required");
  std::ifstream in(config.design);
  if (!in) throw DomainError("cannot open '" + config.design + "'");
  std::stringstream text;
  text << in.rdbuf();
  std::vector<SimDesign> designs = parse_design_json(text.str());
  const std::vector<Method> methods = parse_methods(config.method);
  for (SimDesign& d : designs) {
    if (config.seed) d.seed = *config.seed;
    if (config.quad_points) d.quad_points = *config.quad_points;
    if (config.n_boot) d.n_boot = *config.n_boot;
    if (config.level) d.level = *config.level;
    d.validate();
  }

  std::vector<McReport> reports;
  for (const SimDesign& d : designs) reports.push_back(run_monte_carlo(d, methods, config.threads));
  OutputFile file(config.output, out);
  write_mc_csv(reports, file.stream());
  err << "rng: " << reports.front().rng_description << '\n';
  return kExitOk;
}

int cmd_residuals(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const Method method = config.method == "all" ? Method::mpl : method_from_name(config.method);
  const MeasurementSpec meas = require_measurement(config, {method});
  const ModelSpec spec = model_spec(config);
  const FitOptions options = fit_options(config);
  const double level = config.level.value_or(0.95);
  CovariatePlugIn plug_in;
  if (config.plug_in == "calibrated") {
    plug_in = CovariatePlugIn::calibrated;
  } else if (config.plug_in == "surrogate") {
    plug_in = CovariatePlugIn::surrogate;
  } else {
    throw DomainError("--plug-in must be calibrated or surrogate");
  }
  const Dataset data = load_dataset(config);

  FitOptions point = options;
  point.point_only = true;
  const FitResult result = fit(method, data, meas, spec, point);
  if (!result.converged) err << method_name(method) << ": " << result.message << '\n';
  const ResidualReport report = weighted_residuals(data, result, meas, spec, plug_in);
  const Envelope env =
      simulated_envelope(data, result, meas, spec, config.n_sim, level, options.seed, options, plug_in);

  // rows in ascending residual order so the envelope bounds line up
  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return report.r[a] < report.r[b]; });

  OutputFile file(config.output, out);
  std::ostream& csv = file.stream();
  csv << "index,x_predicted,residual,leverage,env_lower,env_upper\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Eigen::Index t = order[i];
    csv << t + 1 << ',' << format_double(report.x_predicted[t]) << ',' << format_double(report.r[t]) << ','
        << format_double(report.h_star_diag[t]) << ',' << format_double(env.lower[i]) << ','
        << format_double(env.upper[i]) << '\n';
  }
  return result.converged ? kExitOk : kExitNonConvergence;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Errors-in-variables beta regression: fitting, simulation and diagnostics"};
  app.name("eivbeta");
  app.require_subcommand(1);
  RunConfig config;

  auto optional_double = [](CLI::App* sub, const std::string& flag, std::optional<double>& target,
                            const std::string& help) {
    return sub->add_option_function<double>(flag, [&target](const double& v) { target = v; }, help);
  };
  auto optional_int = [](CLI::App* sub, const std::string& flag, std::optional<int>& target,
                         const std::string& help) {
    return sub->add_option_function<int>(flag, [&target](const int& v) { target = v; }, help);
  };
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { config.seed = v; },
                                            "Random seed (default 1)");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--input", config.input, "CSV with columns y, w, z*, v*")->required();
    sub->add_option("--out", config.output, "Output CSV (default: stdout)");
    optional_double(sub, "--tau0", config.tau0, "Surrogate intercept (default 0)");
    optional_double(sub, "--tau1", config.tau1, "Surrogate slope (default 1)");
    auto* s2e = optional_double(sub, "--sigma2e", config.sigma2e, "Known error variance");
    auto* kx = optional_double(sub, "--kx", config.kx, "Known reliability ratio");
    s2e->excludes(kx);
    sub->add_option("--calibrate-from", config.calibrate_from,
                    "Validation CSV (columns x, w) used to estimate tau0, tau1 and sigma2e by OLS");
    sub->add_option("--link-mean", config.link_mean, "Mean link")
        ->check(CLI::IsMember({"logit", "probit", "cloglog"}));
    sub->add_option("--link-precision", config.link_precision, "Precision link")->check(CLI::IsMember({"log"}));
    optional_int(sub, "--quad-points", config.quad_points, "Gauss-Hermite order (default 50)")
        ->check(CLI::Range(1, kMaxHermiteOrder));
    optional_int(sub, "--boot", config.n_boot, "Bootstrap replicates for rc (default 200)")
        ->check(CLI::NonNegativeNumber);
    add_seed(sub);
    optional_double(sub, "--level", config.level, "Confidence level (default 0.95)");
    sub->add_flag("--no-intercept", config.no_intercept, "Do not prepend intercept columns");
    sub->add_flag_function(
        "--no-x-in-precision", [&](std::int64_t) { config.x_in_precision = false; },
        "Constant-in-x precision submodel (lambda fixed at 0)");
    sub->add_option("--threads", config.threads, "OpenMP threads (default: all)");
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one or more estimators to a CSV");
  add_model(fit_cmd);
  fit_cmd->add_option("--method", config.method, "naive, aml, mpl, rc, a comma list, or all")
      ->default_str("all");

  CLI::App* res_cmd = app.add_subcommand("residuals", "Weighted residuals, leverages and simulated envelope");
  add_model(res_cmd);
  res_cmd->add_option("--method", config.method, "Fitting method (default mpl)");
  res_cmd->add_option("--nsim-envelope", config.n_sim, "Envelope replicates (default 100)")
      ->check(CLI::Range(19, 1000000));
  res_cmd->add_option("--plug-in", config.plug_in, "Covariate for fitted values: calibrated or surrogate")
      ->check(CLI::IsMember({"calibrated", "surrogate"}));

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Draw one dataset from a design file");
  sim_cmd->add_option("--design", config.design, "Design JSON")->required();
  sim_cmd->add_option("--replicate", config.replicate, "Replicate index (default 0)");
  sim_cmd->add_option("--out", config.output, "Output CSV (default: stdout)");
  add_seed(sim_cmd);

  CLI::App* mc_cmd = app.add_subcommand("mc", "Monte Carlo bias / RMSE / coverage study");
  mc_cmd->add_option("--design", config.design, "Design JSON")->required();
  mc_cmd->add_option("--out", config.output, "Output CSV (default: stdout)");
  mc_cmd->add_option("--method", config.method, "naive, aml, mpl, rc, a comma list, or all");
  mc_cmd->add_option("--threads", config.threads, "OpenMP threads (default: all)");
  add_seed(mc_cmd);
  optional_int(mc_cmd, "--quad-points", config.quad_points, "Override the design's quadrature order")
      ->check(CLI::Range(1, kMaxHermiteOrder));
  optional_int(mc_cmd, "--boot", config.n_boot, "Override the design's rc bootstrap size")
      ->check(CLI::NonNegativeNumber);
  optional_double(mc_cmd, "--level", config.level, "Override the design's confidence level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (fit_cmd->parsed()) config.subcommand = "fit";
  if (res_cmd->parsed()) config.subcommand = "residuals";
  if (sim_cmd->parsed()) config.subcommand = "simulate";
  if (mc_cmd->parsed()) config.subcommand = "mc";
  if (config.threads > 0) omp_set_num_threads(config.threads);

  try {
    if (config.subcommand == "fit") return cmd_fit(config, out, err);
    if (config.subcommand == "residuals") return cmd_residuals(config, out, err);
    if (config.subcommand == "simulate") return cmd_simulate(config, out, err);
    return cmd_mc(config, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace eivbeta::cli
