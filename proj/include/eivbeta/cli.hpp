#pragma once

// Command-line front end: fit, simulate, mc and residuals subcommands.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eivbeta/estimators.hpp"
#include "eivbeta/model.hpp"
#include "eivbeta/simulate.hpp"

namespace eivbeta::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNonConvergence = 2;

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string output;
  std::string design;
  std::string calibrate_from;
  std::string method = "all";
  std::optional<double> tau0, tau1, sigma2e, kx;
  std::string link_mean = "logit";
  std::string link_precision = "log";
  std::optional<int> quad_points;
  std::optional<int> n_boot;
  int n_sim = 100;
  std::optional<std::uint64_t> seed;
  std::optional<double> level;
  bool no_intercept = false;
  bool x_in_precision = true;
  std::string plug_in = "calibrated";
  int threads = 0;
  std::uint64_t replicate = 0;
};

// Full-precision shortest round-trip decimal.
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  // Throws DomainError naming the column when it is absent.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::istream& in, const std::string& source);

// y and w are required; columns whose names start with z / v go to the mean /
// precision designs, each prefixed with an intercept unless no_intercept.
Dataset dataset_from_table(const CsvTable& table, bool no_intercept);

// OLS of w on x over validation rows (columns x and w); s2_e = RSS / (m - 2).
MeasurementSpec calibrate_measurement(const CsvTable& validation);

// Design file: a JSON object whose keys mirror SimDesign. n and kx may be
// arrays, in which case the grid is expanded (kx outer, n inner). Unknown keys
// are rejected.
std::vector<SimDesign> parse_design_json(const std::string& text);

void write_mc_csv(const std::vector<McReport>& reports, std::ostream& out);

int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_mc(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_residuals(const RunConfig& config, std::ostream& out, std::ostream& err);

// Parses argv into a RunConfig and dispatches. Returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eivbeta::cli
