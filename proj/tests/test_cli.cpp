#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "eivbeta/cli.hpp"
#include "eivbeta/error.hpp"
#include "eivbeta/random.hpp"
#include "support.hpp"

using namespace eivbeta;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "eivbeta");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / ("eivbeta_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// 20-row file with one extra column in each submodel
fs::path write_fit_csv(int n = 20) {
  const auto path = scratch() / ("fit" + std::to_string(n) + ".csv");
  auto design = testing_support::design(0.8, n);
  const auto s = simulate_sample(design, 0);
  Rng rng(3);
  std::ofstream out(path);
  out << "y,w,z1,v1\n";
  for (int t = 0; t < n; ++t)
    out << cli::format_double(s.data.y()[t]) << ',' << cli::format_double(s.data.w()[t]) << ','
        << cli::format_double(rng.normal()) << ',' << cli::format_double(rng.normal()) << '\n';
  return path;
}

// Output tables mix text and numbers, so they are read as strings here.
struct TextTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  double num(std::size_t row, std::size_t col) const { return std::stod(rows[row][col]); }
};

TextTable table(const std::string& text) {
  std::istringstream in(text);
  auto fields = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  TextTable t;
  std::string line;
  std::getline(in, line);
  t.header = fields(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(fields(line));
  return t;
}

}  // namespace

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12815504.56914761166, 6.02214076e23}) {
    double back;
    const std::string s = cli::format_double(v);
    std::istringstream(s) >> back;
    CHECK(back == v);
  }
}

TEST_CASE("naive fit row count and z column") {
  const auto csv = write_fit_csv();
  const Run r = run({"fit", "--input", csv.string(), "--method", "naive"});
  CHECK(r.code == cli::kExitOk);
  const auto t = table(r.out);
  CHECK(t.header == std::vector<std::string>{"method", "parameter", "estimate", "se", "z", "p_value"});
  REQUIRE(t.rows.size() == 6);
  for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(std::fabs(t.num(i, 4) - t.num(i, 2) / t.num(i, 3)) <= 1e-6);
  CHECK(t.rows[2][1] == "beta");
  CHECK(t.rows[5][1] == "lambda");
}

TEST_CASE("rc with zero error variance reproduces naive") {
  const auto csv = write_fit_csv(60);
  const auto out_n = scratch() / "naive.csv";
  const auto out_r = scratch() / "rc.csv";
  CHECK(run({"fit", "--input", csv.string(), "--method", "naive", "--out", out_n.string()}).code == 0);
  CHECK(run({"fit", "--input", csv.string(), "--method", "rc", "--sigma2e", "0", "--boot", "0", "--out",
             out_r.string()})
            .code == 0);
  const auto a = table(slurp(out_n)), b = table(slurp(out_r));
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i][1] == b.rows[i][1]);
    CHECK(a.rows[i][2] == b.rows[i][2]);
  }
}

TEST_CASE("all methods with a reliability ratio") {
  const auto csv = write_fit_csv(80);
  const auto out = scratch() / "all.csv";
  const Run r = run({"fit", "--input", csv.string(), "--kx", "0.8", "--boot", "20", "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("aml") != std::string::npos);
  const std::string text = slurp(out);
  // 6 naive + 8 aml + 6 mpl + 6 rc
  CHECK(table(text).rows.size() == 26);
}

TEST_CASE("input errors exit with 1") {
  const auto dir = scratch();
  const auto missing = dir / "missing.csv";
  {
    std::ofstream out(missing);
    out << "y,z1\n0.5,1\n";
  }
  CHECK(run({"fit", "--input", missing.string(), "--method", "naive"}).code == cli::kExitInput);
  const auto bad_y = dir / "bad_y.csv";
  {
    std::ofstream out(bad_y);
    out << "y,w\n";
    for (int i = 0; i < 10; ++i) out << (i == 3 ? 1.5 : 0.4) << ',' << i << '\n';
  }
  CHECK(run({"fit", "--input", bad_y.string(), "--method", "naive"}).code == cli::kExitInput);
  const auto csv = write_fit_csv();
  // infeasible calibration
  const Run inf = run({"fit", "--input", csv.string(), "--method", "mpl", "--sigma2e", "1000"});
  CHECK(inf.code == cli::kExitInput);
  CHECK(inf.err.find("error variance") != std::string::npos);
  CHECK(run({"fit", "--input", csv.string(), "--method", "mpl"}).code == cli::kExitInput);
  CHECK(run({"fit", "--input", csv.string(), "--sigma2e", "1", "--kx", "0.5"}).code == cli::kExitInput);
  CHECK(run({"fit", "--input", csv.string(), "--link-mean", "loglog"}).code == cli::kExitInput);
  CHECK(run({"bogus"}).code == cli::kExitInput);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("non-convergence exits with 2") {
  const auto csv = write_fit_csv(40);
  CHECK(run({"fit", "--input", csv.string(), "--method", "naive"}).code == 0);
  // the iteration cap is not a flag; an absurd quadrature-free case is forced instead
  // by a constant response which leaves the precision unbounded
  const auto flat = scratch() / "flat.csv";
  {
    std::ofstream out(flat);
    out << "y,w\n";
    for (int i = 0; i < 30; ++i) out << 0.5 << ',' << i * 0.1 << '\n';
  }
  CHECK(run({"fit", "--input", flat.string(), "--method", "naive"}).code == cli::kExitNonConvergence);
}

TEST_CASE("calibrate-from estimates the measurement model by OLS") {
  const auto dir = scratch();
  const auto val = dir / "validation.csv";
  {
    std::ofstream out(val);
    out << "x,w\n";
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
      const double x = rng.normal(2, 1);
      out << cli::format_double(x) << ',' << cli::format_double(0.7351 + 1.062 * x + rng.normal(0, 0.03)) << '\n';
    }
  }
  const auto meas = cli::calibrate_measurement(cli::read_csv(val.string()));
  CHECK(meas.tau0() == doctest::Approx(0.7351).epsilon(0.02));
  CHECK(meas.tau1() == doctest::Approx(1.062).epsilon(0.01));
  CHECK(*meas.fixed_error_variance() == doctest::Approx(0.03).epsilon(0.25));
  const auto csv = write_fit_csv(60);
  CHECK(run({"fit", "--input", csv.string(), "--method", "mpl", "--calibrate-from", val.string()}).code == 0);
  CHECK(run({"fit", "--input", csv.string(), "--method", "mpl", "--calibrate-from", val.string(), "--tau0", "1"})
            .code == cli::kExitInput);
}

TEST_CASE("residuals output") {
  const auto csv = write_fit_csv(50);
  const auto out = scratch() / "res.csv";
  const Run r = run({"residuals", "--input", csv.string(), "--kx", "0.8", "--nsim-envelope", "25", "--out",
                     out.string()});
  CHECK(r.code == 0);
  const auto t = table(slurp(out));
  CHECK(t.header == std::vector<std::string>{"index", "x_predicted", "residual", "leverage", "env_lower", "env_upper"});
  REQUIRE(t.rows.size() == 50);
  double lev = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(t.num(i, 4) <= t.num(i, 5));
    lev += t.num(i, 3);
  }
  // intercept + z1 + w
  CHECK(lev == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(run({"residuals", "--input", csv.string(), "--kx", "0.8", "--nsim-envelope", "10"}).code ==
        cli::kExitInput);
}

TEST_CASE("design files") {
  CHECK_THROWS_AS(cli::parse_design_json(R"({"n": 50, "kx": 0.75, "colour": 1})"), DomainError);
  CHECK_THROWS_AS(cli::parse_design_json(R"({"n": 50})"), DomainError);
  CHECK_THROWS_AS(cli::parse_design_json(R"({"n": 50, "kx": 0.75, "sigma2e": 1})"), DomainError);
  CHECK_THROWS_AS(cli::parse_design_json("{"), DomainError);
  const auto grid = cli::parse_design_json(R"({"n": [50, 100], "kx": [0.5, 0.95], "precision_varying": true})");
  REQUIRE(grid.size() == 4);
  CHECK(grid[1].n == 100);
  CHECK(grid[2].meas.reliability(2.7) == 0.95);
  CHECK(grid[0].theta_true.gamma[0] == 4.0);
  CHECK(grid[0].theta_true.lambda == 0.5);
}

TEST_CASE("simulate and mc subcommands") {
  const auto dir = scratch();
  const auto design = dir / "design.json";
  {
    std::ofstream out(design);
    out << R"({"n": 40, "kx": 0.8, "n_reps": 3, "n_boot": 0, "seed": 99})";
  }
  const auto sim = dir / "sim.csv";
  CHECK(run({"simulate", "--design", design.string(), "--replicate", "2", "--out", sim.string()}).code == 0);
  const auto t = cli::read_csv(sim.string());
  CHECK(t.rows.size() == 40);
  CHECK(t.header == std::vector<std::string>{"y", "w", "x"});
  const auto direct = simulate_sample(cli::parse_design_json(slurp(design)).front(), 2);
  CHECK(t.rows[7][0] == direct.data.y()[7]);

  const auto a = dir / "mc_a.csv", b = dir / "mc_b.csv";
  CHECK(run({"mc", "--design", design.string(), "--method", "naive,mpl", "--out", a.string(), "--threads", "1"})
            .code == 0);
  CHECK(run({"mc", "--design", design.string(), "--method", "naive,mpl", "--out", b.string(), "--threads", "3"})
            .code == 0);
  CHECK(slurp(a) == slurp(b));
  const auto mc = table(slurp(a));
  CHECK(mc.rows.size() == 6);
  CHECK(mc.header.size() == 8);
}
