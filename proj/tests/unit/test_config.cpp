#include "ctlmpc/config.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace ctlmpc;

namespace {

std::string scenario_path(const char* name) { return std::string(CTLMPC_SCENARIO_DIR) + "/" + name; }

std::string read(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string minimal(const std::string& extra_controller = "", const std::string& extra_root = "") {
  return R"({
  "plant": {"G": [[{"num": [1], "den": [1, 3], "delay": 1}]], "R_vv": 0.1},
  "model": {"G": [[{"num": [1], "den": [1, 3], "delay": 1}]], "H": [[{"num": [1], "den": [0, 1]}]]},
  "controller": {"Ts": 2, "N": 5)" + extra_controller + R"(},
  "T_sim": 20)" + extra_root + "\n}";
}

}  // namespace

TEST(Config, BundledScenariosLoad) {
  const Scenario siso = load_config(scenario_path("siso.json"));
  EXPECT_EQ(siso.name, "siso");
  EXPECT_EQ(siso.N, 20u);
  EXPECT_DOUBLE_EQ(siso.Ts_controller, 5.0);
  EXPECT_DOUBLE_EQ(siso.plant_G(0, 0).delay, 2.5);
  EXPECT_EQ(siso.ratio(), 5u);

  const Scenario mill = load_config(scenario_path("cement_mill.json"));
  EXPECT_EQ(mill.plant_G.rows(), 2u);
  EXPECT_DOUBLE_EQ(mill.Ts, 60.0);
  EXPECT_DOUBLE_EQ(mill.Ts_controller, 120.0);
  EXPECT_DOUBLE_EQ(mill.T_sim, 5400.0);
  // per-minute weights become per-second ones
  EXPECT_NEAR(mill.weights.Q_cz(0, 0), 200.0 / 60.0, 1e-12);
  EXPECT_NEAR(mill.weights.Q_cdu(0, 0), 20.0 * 60.0, 1e-9);
  EXPECT_NEAR(mill.dt_weights.Q_cz(0, 0), 200.0, 1e-12);
  EXPECT_DOUBLE_EQ(mill.limits.du_max(1), 10.0);
}

TEST(Config, RoundTripIsExact) {
  for (const char* name : {"siso.json", "cement_mill.json"}) {
    const Scenario a = load_config(scenario_path(name));
    const std::string text = serialize_config(a);
    const Scenario b = parse_config(text, name);
    EXPECT_TRUE(a == b) << name;
    EXPECT_EQ(serialize_config(b), text);
  }
}

TEST(Config, MinimalDefaults) {
  const Scenario sc = parse_config(minimal());
  EXPECT_TRUE(std::isinf(sc.limits.u_max(0)));
  EXPECT_EQ(sc.mode, NoiseMode::Deterministic);
  EXPECT_EQ(sc.weights.Q_cz.rows(), 1);
  EXPECT_EQ(sc.plant_Gd.cols(), 0u);
}

TEST(Config, MatrixForms) {
  const Scenario sc = parse_config(minimal(R"(, "weights": {"Q_cz": [[3]], "Q_cdu": 2, "q_ceco": [0.5]})"));
  EXPECT_DOUBLE_EQ(sc.weights.Q_cz(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(sc.weights.Q_cdu(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(sc.weights.q_ceco(0), 0.5);
}

TEST(Config, InvertedBoxIsRejectedWithField) {
  try {
    parse_config(minimal(R"(, "limits": {"u_min": [1], "u_max": [-1]})"), "box.json");
    FAIL();
  } catch (const ConfigError& e) {
    ASSERT_FALSE(e.issues().empty());
    EXPECT_EQ(e.issues()[0].field, "controller.limits.u_min[0]");
    EXPECT_NE(std::string(e.what()).find("box.json"), std::string::npos);
  }
}

TEST(Config, SyntaxErrorReportsLine) {
  const std::string text = "{\n  \"name\": \"x\",\n  \"plant\": {,\n}";
  try {
    parse_config(text, "broken.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_GT(e.column(), 1u);
  }
}

TEST(Config, CollectsSeveralIssues) {
  try {
    parse_config(minimal(R"(, "colour": 1)", R"(, "mode": "loud", "bogus": true)"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_GE(e.issues().size(), 3u);
  }
}

TEST(Config, NonStrictlyProperNoiseModelRejected) {
  std::string text = minimal();
  const std::string h = R"("H": [[{"num": [1], "den": [0, 1]}]])";
  text.replace(text.find(h), h.size(), R"("H": [[{"num": [1, 1], "den": [0, 1]}]])");
  EXPECT_THROW(parse_config(text), ConfigError);
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/x.json"), ConfigError); }

TEST(Config, BadBoxFixture) {
  EXPECT_THROW(load_config(std::string(CTLMPC_SCENARIO_DIR) + "/../tests/data/bad_box.json"), ConfigError);
  EXPECT_FALSE(read(scenario_path("siso.json")).empty());
}
