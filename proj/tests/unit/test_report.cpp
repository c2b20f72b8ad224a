#include "ctlmpc/config.hpp"
#include "ctlmpc/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ctlmpc;
namespace fs = std::filesystem;

namespace {

Scenario short_siso() {
  Scenario sc = load_config(std::string(CTLMPC_SCENARIO_DIR) + "/siso.json");
  sc.T_sim = 120;
  return sc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ctlmpc_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Parse, TsList) {
  EXPECT_EQ(parse_ts_list("5,15,25"), (std::vector<double>{5, 15, 25}));
  EXPECT_EQ(parse_ts_list("2.5"), (std::vector<double>{2.5}));
  EXPECT_THROW(parse_ts_list(""), std::invalid_argument);
  EXPECT_THROW(parse_ts_list("-1"), std::invalid_argument);
}

TEST(Parse, SeedList) {
  EXPECT_EQ(parse_seed_list("1..4"), (std::vector<std::uint64_t>{1, 2, 3, 4}));
  EXPECT_EQ(parse_seed_list("7,3"), (std::vector<std::uint64_t>{7, 3}));
  EXPECT_THROW(parse_seed_list("4..1"), std::invalid_argument);
  EXPECT_THROW(parse_seed_list("x"), std::invalid_argument);
}

TEST(Parse, Choices) {
  EXPECT_EQ(parse_controller_choice("both"), ControllerChoice::Both);
  EXPECT_EQ(parse_controller_choice("ct"), ControllerChoice::Ct);
  EXPECT_EQ(parse_noise_mode("stoch"), NoiseMode::Stochastic);
  EXPECT_THROW(parse_controller_choice("pid"), std::invalid_argument);
}

TEST(Csv, HeaderColumns) {
  const Scenario sc = short_siso();
  EXPECT_EQ(results_header(sc),
            "controller,t,zbar_1,y_1,z_1,u_1,d_1,xi_1,eta_1,stage_cost,qp_iters,controller_tick");
}

TEST(Run, WritesOutputsAndIsByteIdentical) {
  const Scenario sc = short_siso();
  RunOptions opt;
  opt.plot = true;
  opt.mode = NoiseMode::Stochastic;
  opt.out = scratch("run_a");
  const RunReport a = run(sc, opt);
  EXPECT_EQ(a.exit_code, 0);
  ASSERT_EQ(a.runs.size(), 2u);
  for (const char* f : {"results.csv", "summary.json", "outputs.svg", "inputs.svg"}) {
    EXPECT_TRUE(fs::exists(opt.out / f)) << f;
  }
  const std::string csv = slurp(opt.out / "results.csv");
  opt.out = scratch("run_b");
  run(sc, opt);
  EXPECT_EQ(csv, slurp(opt.out / "results.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 120);
  const std::string summary = slurp(opt.out / "summary.json");
  EXPECT_NE(summary.find("\"comparison\""), std::string::npos);
  EXPECT_NE(summary.find("\"status\": \"ok\""), std::string::npos);
}

TEST(Run, OverridesApply) {
  RunOptions opt;
  opt.ts_controller = 15.0;
  opt.seed = 9;
  opt.mode = NoiseMode::Stochastic;
  const Scenario sc = apply_overrides(short_siso(), opt);
  EXPECT_DOUBLE_EQ(sc.Ts_controller, 15.0);
  EXPECT_EQ(sc.seed, 9u);
  EXPECT_EQ(sc.mode, NoiseMode::Stochastic);
  opt.controller = ControllerChoice::Dt;
  opt.out = scratch("run_dt");
  const RunReport r = run(short_siso(), opt);
  ASSERT_EQ(r.runs.size(), 1u);
  EXPECT_EQ(r.runs[0].kind, ControllerKind::Discrete);
}

TEST(Sweep, RowsPerCombination) {
  const fs::path out = scratch("sweep");
  const auto rows = sweep(short_siso(), {5, 10}, {1, 2}, out, NoiseMode::Stochastic);
  EXPECT_EQ(rows.size(), 8u);
  EXPECT_TRUE(fs::exists(out / "sweep.csv"));
  for (const auto& r : rows) EXPECT_FALSE(r.failed);
}

TEST(Svg, WellFormedRoot) {
  const Scenario sc = short_siso();
  RunOptions opt;
  opt.out = scratch("svg");
  const RunReport r = run(sc, opt);
  const std::string svg = outputs_svg(sc, r.runs);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
