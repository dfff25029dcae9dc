#include "rlm/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace rlm {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rlm_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rlm_bench");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TEST(FormatDouble, RoundTripsExactly) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.123}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(TraceCsv, RoundTrip) {
  std::vector<IterRecord> trace(3);
  for (int k = 0; k < 3; ++k) {
    trace[k].k = k;
    trace[k].f = 1.0 / (k + 3.0);
    trace[k].grad_norm = std::pow(0.1, k * 1.7);
    trace[k].lambda = 0.3 * k;
    trace[k].mu = 0.1;
    trace[k].rho = k == 1 ? std::numeric_limits<double>::quiet_NaN() : 0.7;
    trace[k].step_norm = 2.0 / 7.0;
    trace[k].successful = k != 1;
    trace[k].sub_iters = k + 4;
    trace[k].wall_ms = 1.25 * k;
  }
  std::stringstream ss;
  write_trace_csv(ss, trace);
  const auto back = read_trace_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(back[k].k, k);
    EXPECT_EQ(back[k].f, trace[k].f);
    EXPECT_EQ(back[k].grad_norm, trace[k].grad_norm);
    EXPECT_EQ(back[k].lambda, trace[k].lambda);
    EXPECT_EQ(back[k].successful, trace[k].successful);
    EXPECT_EQ(back[k].sub_iters, trace[k].sub_iters);
    EXPECT_EQ(back[k].wall_ms, trace[k].wall_ms);
  }
  EXPECT_TRUE(std::isnan(back[1].rho));
}

TEST(TraceCsv, ReadsOneColumn) {
  std::stringstream ss("a,b\n1,2\n3,4\n");
  EXPECT_EQ(read_csv_column(ss, "b"), (std::vector<double>{2, 4}));
}

std::vector<std::pair<double, double>> polyline_points(const std::string& svg) {
  const std::regex re("<polyline[^>]*points=\"([^\"]*)\"");
  std::smatch m;
  if (!std::regex_search(svg, m, re)) return {};
  std::vector<std::pair<double, double>> pts;
  std::istringstream is(m[1].str());
  std::string tok;
  while (is >> tok) {
    const auto comma = tok.find(',');
    pts.emplace_back(std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1)));
  }
  return pts;
}

TEST(Svg, TwoPointPolyline) {
  std::vector<IterRecord> trace(2);
  trace[0].grad_norm = 1.0;
  trace[1].k = 1;
  trace[1].grad_norm = 1e-3;
  const std::string svg = emit_svg(trace, "grad_norm");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  const auto pts = polyline_points(svg);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_LT(pts[0].first, pts[1].first);
  EXPECT_LT(pts[0].second, pts[1].second);
  EXPECT_EQ(svg.find("warning"), std::string::npos);
}

TEST(Svg, DecreasingSeriesHasIncreasingPixelRows) {
  std::vector<double> xs, ys;
  for (int k = 0; k < 8; ++k) {
    xs.push_back(k);
    ys.push_back(std::pow(10.0, -k * 1.5));
  }
  const auto pts = polyline_points(render_svg(xs, ys, "iteration", "grad_norm"));
  ASSERT_EQ(pts.size(), 8u);
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GT(pts[i].second, pts[i - 1].second);
}

TEST(Svg, NonpositiveValuesFallBackToLinear) {
  const std::string svg = render_svg({0, 1, 2}, {1.0, 0.0, -1.0}, "iteration", "rho");
  EXPECT_NE(svg.find("warning"), std::string::npos);
  EXPECT_EQ(polyline_points(svg).size(), 3u);
  EXPECT_THROW(render_svg({}, {}, "x", "y"), ContractViolation);
}

TEST(Cli, OrderOnQuadraticSequence) {
  const fs::path dir = fresh_dir("order");
  {
    std::ofstream os(dir / "t.csv");
    os << "iter,grad_norm\n";
    for (int k = 0; k < 5; ++k) os << k << ',' << format_double(std::pow(0.5, std::pow(2.0, k))) << '\n';
  }
  const auto r = run_cli({"order", "--trace", (dir / "t.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::smatch m;
  ASSERT_TRUE(std::regex_search(r.out, m, std::regex("q=([0-9.eE+-]+)")));
  EXPECT_NEAR(std::stod(m[1].str()), 2.0, 0.05);
}

TEST(Cli, OrderWithTooFewValuesFails) {
  const fs::path dir = fresh_dir("order_short");
  {
    std::ofstream os(dir / "t.csv");
    os << "grad_norm\n1\n";
  }
  EXPECT_EQ(run_cli({"order", "--trace", (dir / "t.csv").string()}).code, 1);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"solve", "--problem", "completion", "--m", "10"}).code, 2);
  EXPECT_EQ(run_cli({"solve", "--problem", "torus"}).code, 2);
  EXPECT_EQ(run_cli({"sweep", "--spec", "/nonexistent/spec.json"}).code, 2);
  EXPECT_EQ(run_cli({"order"}).code, 2);
}

TEST(Cli, SolveWritesTraceAndSummary) {
  const fs::path dir = fresh_dir("solve");
  const auto r = run_cli({"solve", "--problem", "sphere", "--d", "5", "--m", "8", "--seed", "3", "--out", dir.string(),
                          "--plot", "grad_norm", "--audit"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("GradTol"), std::string::npos);
  std::ifstream ts(dir / "trace.csv");
  const auto trace = read_trace_csv(ts);
  EXPECT_FALSE(trace.empty());
  const json j = json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(j.at("status"), "GradTol");
  EXPECT_EQ(j.at("iters").get<std::size_t>(), trace.size());
  EXPECT_TRUE(j.at("audit_violations").empty());
  EXPECT_TRUE(fs::exists(dir / "trace_grad_norm.svg"));
}

TEST(Cli, SolveStepFailureExitsOne) {
  const fs::path dir = fresh_dir("solve_fail");
  const auto r = run_cli({"solve", "--problem", "sphere", "--d", "5", "--m", "8", "--seed", "3", "--out", dir.string(),
                          "--solver", "rsd", "--initial-step", "1e300"});
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("StepFailure"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
}

TEST(Cli, CheckPassesOnShippedProblem) {
  const auto r = run_cli({"check", "--problem", "cp", "--dims", "4,3,3", "--rank", "2", "--seed", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(json::parse(r.out).at("pass").get<bool>());
}

json small_sweep(const fs::path& out) {
  std::vector<double> rs;
  for (int i = 0; i < 10; ++i) rs.push_back(1.5 + 0.3 * i);
  std::vector<int> seeds;
  for (int s = 1; s <= 10; ++s) seeds.push_back(s);
  return {{"problem", {{"kind", "completion"}, {"m", 10}, {"n", 10}, {"k", 1}, {"rs", rs}}},
          {"solver", {{"kind", "rlm"}, {"max_iter", 20}}},
          {"seeds", seeds},
          {"timing", false},
          {"write_traces", false},
          {"output", out.string()}};
}

TEST(Sweep, HundredRowsAndByteIdenticalReports) {
  const fs::path dir = fresh_dir("sweep");
  std::string reports[2];
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path out = dir / ("run" + std::to_string(rep));
    {
      std::ofstream os(dir / "spec.json");
      os << small_sweep(out).dump();
    }
    const auto r = run_cli({"sweep", "--spec", (dir / "spec.json").string(), "--threads", rep == 0 ? "1" : "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    reports[rep] = slurp(out / "report.csv");
  }
  EXPECT_EQ(reports[0], reports[1]);
  EXPECT_EQ(slurp(dir / "run0" / "aggregate.json"), slurp(dir / "run1" / "aggregate.json"));
  std::istringstream is(reports[0]);
  std::string line;
  int rows = -1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 100);
}

TEST(Sweep, RejectsDuplicateSeeds) {
  json j = small_sweep(fresh_dir("dup"));
  j["seeds"] = {1, 1};
  EXPECT_THROW(parse_experiment(j), ContractViolation);
}

}  // namespace
}  // namespace rlm
