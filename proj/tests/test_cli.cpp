#include "lexint_cli.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "lexint");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = lexint::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

TEST(Cli, IntegrateTrajectory) {
  const Result r = run({"integrate", "--scheme", "GR-IA-LEX", "--system", "anharmonic2d", "--radius", "1", "--step",
                        "0.05", "--t-end", "12.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 252u);  // header + 250 steps + initial state
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "x1", "x2", "p1", "p2", "H", "cost"}));
  EXPECT_EQ(rows[1][0], "0");
  EXPECT_EQ(std::stod(rows.back()[0]), 12.5);
  const double h0 = std::stod(rows[1][5]);
  double prev_cost = -1.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 7u);
    EXPECT_LE(std::abs(std::stod(rows[i][5]) - h0), 1e-12 * std::abs(h0));
    const double cost = std::stod(rows[i][6]);
    EXPECT_GT(cost, prev_cost);
    prev_cost = cost;
  }
}

TEST(Cli, IntegrateIsByteStable) {
  const std::vector<std::string> args{"integrate", "--scheme", "IMP-SLEX", "--radius", "0.2", "--step", "0.1"};
  const Result a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, OutFileMatchesStdout) {
  const auto path = std::filesystem::temp_directory_path() / "lexint_cli_test.csv";
  const Result to_file = run({"integrate", "--scheme", "TR", "--step", "0.1", "--t-end", "1", "--out", path.string()});
  ASSERT_EQ(to_file.code, 0) << to_file.err;
  const Result to_stdout = run({"integrate", "--scheme", "TR", "--step", "0.1", "--t-end", "1"});
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  EXPECT_EQ(buf.str(), to_stdout.out);
  std::filesystem::remove(path);
}

TEST(Cli, ConfigFileMatchesFlags) {
  const auto path = std::filesystem::temp_directory_path() / "lexint_cli_test.ini";
  {
    std::ofstream cfg(path);
    cfg << "[integrate]\nscheme=[\"IMP-LEX\"]\nstep=0.1\nt-end=1\n";
  }
  const Result from_file = run({"--config", path.string(), "integrate"});
  const Result from_flags = run({"integrate", "--scheme", "IMP-LEX", "--step", "0.1", "--t-end", "1"});
  std::filesystem::remove(path);
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_EQ(from_file.out, from_flags.out);
}

TEST(Cli, ValidationErrors) {
  Result r = run({"integrate", "--scheme", "RK4", "--step", "0.1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("GR-SYM-SLEX"), std::string::npos);  // lists valid names
  r = run({"integrate", "--scheme", "IMP", "--system", "kepler", "--step", "0.1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("anharmonic2d"), std::string::npos);
  EXPECT_EQ(run({"integrate", "--scheme", "IMP", "--radius", "12", "--step", "0.1"}).code, 2);
  EXPECT_EQ(run({"integrate", "--scheme", "IMP", "--step", "-1"}).code, 2);
  EXPECT_EQ(run({"integrate", "--scheme", "IMP"}).code, 2);
  EXPECT_EQ(run({"integrate", "--bogus"}).code, 2);
  EXPECT_EQ(run({"benchmark", "--preset", "fig9"}).code, 2);
  EXPECT_EQ(run({"order", "--scheme", "IMP", "--steps", "0.1,0.05"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(Cli, NumericalFailureExitCode) {
  const Result r = run({"integrate", "--scheme", "IMP", "--radius", "1", "--step", "3"});
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, OrderReportsSecondOrderForMidpoint) {
  const Result r = run({"order", "--scheme", "IMP", "--system", "anharmonic2d", "--radius", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  double slope = std::nan("");
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    if (name == "IMP") ls >> slope;
  }
  EXPECT_NEAR(slope, 2.0, 0.25);
}

TEST(Cli, BenchmarkCustomSweep) {
  const Result r = run({"benchmark", "--scheme", "EEU", "IEU", "EEU-LEX", "--radius", "0.2", "--steps", "0.01,0.005",
                        "--t-end", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0].size(), 11u);
  EXPECT_EQ(rows[0][0], "scheme");
  EXPECT_EQ(rows[1][0], "EEU");
  EXPECT_EQ(rows[5][0], "EEU-LEX");
}

TEST(Cli, StabilityAndCalibrate) {
  Result r = run({"stability", "--scheme", "IEU-LEX", "EEU", "--case", "decay", "--steps", "1,3,100"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("IEU-LEX"), std::string::npos);
  EXPECT_NE(r.out.find("diverged"), std::string::npos);
  r = run({"calibrate", "--scheme", "EEU-LEX", "--radius", "0.2", "--step", "0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("EEU-LEX"), std::string::npos);
}

TEST(Cli, BenchmarkPresetScheme) {
  // Only the first grid point of the preset: the scheme list is what is checked.
  const Result r = run({"benchmark", "--preset", "euler-r0.2", "--steps", "0.01", "--t-end", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(r.out);
  std::vector<std::string> names;
  for (std::size_t i = 1; i < rows.size(); ++i) names.push_back(rows[i][0]);
  EXPECT_EQ(names, (std::vector<std::string>{"EEU", "IEU", "EEU-LEX", "IEU-LEX", "IEU-ILEX"}));
}

}  // namespace
