#include "ctlmpc/config.hpp"
#include "ctlmpc/simulator.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ctlmpc;
namespace t = ctlmpc::testing;

namespace {

Scenario siso() { return load_config(std::string(CTLMPC_SCENARIO_DIR) + "/siso.json"); }

TransferMatrix single(const RationalTransfer& g, ChannelRole role = ChannelRole::Deterministic) {
  TransferMatrix m(1, 1, role);
  m(0, 0) = g;
  return m;
}

}  // namespace

TEST(Schedule, LeftContinuousPointAndIntervalValues) {
  Schedule s{{0.0, 10.0}, {Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)}};
  EXPECT_EQ(s.at(10.0)(0), 1.0);
  EXPECT_EQ(s.after(10.0)(0), 2.0);
  EXPECT_EQ(s.at(10.5)(0), 2.0);
  EXPECT_EQ(s.at(0.0)(0), 1.0);
  EXPECT_EQ(s.after(-1.0)(0), 1.0);
  EXPECT_EQ(s.snapped(4.0).times[1], 12.0);
  EXPECT_EQ(Schedule::constant(Vector::Ones(2)).dim(), 2);
}

TEST(Plant, ZeroDisturbanceModelStepResponse) {
  const auto g = RationalTransfer::from_factors(2.0, {}, {{1, 5}}, 1.5);
  const Plant p0 = build_plant(single(g), TransferMatrix(1, 1, ChannelRole::Disturbance), 1.0,
                               Matrix::Zero(1, 1), Matrix::Zero(1, 1));
  Plant p = p0;
  EXPECT_EQ(p.n_d(), 1);
  for (int k = 0; k < 30; ++k) {
    const double tk = k;
    const double expected = tk >= 1.5 ? 2.0 * (1.0 - std::exp(-(tk - 1.5) / 5.0)) : 0.0;
    EXPECT_NEAR(p.output(Vector::Ones(1), Vector::Constant(1, 5.0))(0), expected, 1e-12);
    p.advance(Vector::Ones(1), Vector::Constant(1, 5.0), Vector::Zero(1));
  }
}

TEST(Plant, SisoDisturbanceDcGain) {
  const Scenario sc = siso();
  Plant p = build_plant(sc.plant_G, sc.plant_Gd, sc.Ts, sc.R_ww, sc.R_vv);
  for (int k = 0; k < 400; ++k) p.advance(Vector::Zero(1), Vector::Constant(1, 2.0), Vector::Zero(1));
  EXPECT_NEAR(p.output(Vector::Zero(1), Vector::Constant(1, 2.0))(0), -1.0, 1e-9);
}

TEST(Plant, MatchesFineGridWithDisturbance) {
  t::Rng rng(9);
  TransferMatrix G(2, 1, ChannelRole::Deterministic), Gd(2, 1, ChannelRole::Disturbance);
  G(0, 0) = RationalTransfer::from_factors(1.3, {{1, -2}}, {{1, 4}, {1, 2}}, 1.7);
  G(1, 0) = RationalTransfer::from_factors(-0.4, {}, {{1, 3}}, 0.4);
  Gd(0, 0) = RationalTransfer::from_factors(0.9, {}, {{1, 2.5}}, 2.2);
  const double Ts = 0.8;
  Plant p = build_plant(G, Gd, Ts, Matrix::Zero(1, 1), Matrix::Zero(2, 2));
  std::vector<DelayedSisoSS> ch;
  for (std::size_t i = 0; i < 2; ++i) ch.push_back(realize_siso(G(i, 0), i, 0));
  ch.push_back(realize_siso(Gd(0, 0), 0, 1));
  std::vector<Vector> inputs;
  for (int k = 0; k < 20; ++k) inputs.push_back(t::random_vector(rng, 2));
  const auto ref = t::FineGridSimulator(ch, 2, 2).sampled_outputs(inputs, Ts, 200);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Vector u = inputs[k].head(1), d = inputs[k].tail(1);
    EXPECT_LT((p.output(u, d) - ref[k]).cwiseAbs().maxCoeff(), 1e-8) << k;
    p.advance(u, d, Vector::Zero(1));
  }
}

TEST(Noise, SeededAndReplayable) {
  Scenario sc = siso();
  sc.mode = NoiseMode::Stochastic;
  const NoiseSequence a = generate_noise(sc), b = generate_noise(sc);
  ASSERT_EQ(a.w.size(), sc.plant_steps());
  for (std::size_t k = 0; k < a.w.size(); ++k) {
    ASSERT_EQ(a.w[k], b.w[k]);
    ASSERT_EQ(a.v[k], b.v[k]);
  }
  double var = 0.0;
  for (const Vector& v : a.v) var += v.squaredNorm();
  EXPECT_NEAR(var / a.v.size(), 0.0004, 0.0001);
  sc.seed = 2;
  EXPECT_NE(generate_noise(sc).v[0], a.v[0]);
  sc.mode = NoiseMode::Deterministic;
  EXPECT_EQ(generate_noise(sc).w[5].norm(), 0.0);
}

TEST(ClosedLoop, ZeroTrackingWeightHoldsZeroInput) {
  Scenario sc = siso();
  sc.weights.Q_cz.setZero();
  sc.T_sim = 200;
  const SimResult r = run_closed_loop(sc, ControllerKind::Continuous);
  for (const SimSample& s : r.samples) EXPECT_NEAR(s.u(0), 0.0, 1e-8);
}

TEST(ClosedLoop, DeterministicRunsAreIdentical) {
  Scenario sc = siso();
  sc.mode = NoiseMode::Stochastic;
  sc.T_sim = 300;
  const SimResult a = run_closed_loop(sc, ControllerKind::Continuous);
  const SimResult b = run_closed_loop(sc, ControllerKind::Continuous);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    ASSERT_EQ(a.samples[k].u, b.samples[k].u);
    ASSERT_EQ(a.samples[k].y, b.samples[k].y);
  }
  EXPECT_EQ(a.metrics.total_cost, b.metrics.total_cost);
}

TEST(ClosedLoop, SampleBookkeeping) {
  Scenario sc = siso();
  sc.T_sim = 100;
  const SimResult r = run_closed_loop(sc, ControllerKind::Discrete);
  ASSERT_EQ(r.samples.size(), 100u);
  EXPECT_EQ(r.metrics.controller_steps, 20u);
  EXPECT_TRUE(r.samples[0].controller_tick);
  EXPECT_FALSE(r.samples[1].controller_tick);
  EXPECT_EQ(r.samples[3].u, r.samples[1].u);
  EXPECT_LE(r.metrics.max_kkt_residual, 1e-8);
  for (const SimSample& s : r.samples) EXPECT_LE(std::abs(s.u(0)), 1.0 + 1e-9);
}

TEST(ClosedLoop, MatchedModelHasNoInnovation) {
  // plant = model, no disturbance, controller at the plant rate
  Scenario sc = siso();
  sc.plant_G = sc.model_G;
  sc.Ts_controller = sc.Ts;
  sc.disturbance = Schedule::constant(Vector::Zero(1));
  const ControllerDesign d = design_controller(sc, ControllerKind::Continuous);
  Plant p = build_plant(sc.plant_G, sc.plant_Gd, sc.Ts, sc.R_ww, sc.R_vv);
  ControllerState st = initial_state(d, Vector::Zero(1));
  Vector u = Vector::Zero(1);
  const Vector zero = Vector::Zero(1);
  for (int k = 0; k < 150; ++k) {
    StepInputs in{{Vector::Constant(1, 1.0)}, {}, p.output(u, zero)};
    const StepResult r = step(d, st, in);
    EXPECT_LT(r.innovation.norm(), 1e-9) << k;
    u = r.u;
    p.advance(u, zero, zero);
  }
  EXPECT_NEAR(p.output(u, zero)(0), 1.0, 1e-4);
}

TEST(Metrics, HandComputed) {
  Scenario sc = siso();
  sc.limits.z_max(0) = 1.5;
  std::vector<SimSample> s(4);
  const double z[] = {0.0, 1.0, 2.0, 1.0};
  for (int k = 0; k < 4; ++k) {
    s[k].t = k;
    s[k].zbar = Vector::Constant(1, 1.0);
    s[k].z = Vector::Constant(1, z[k]);
    s[k].u = Vector::Constant(1, 0.5 * k);
    s[k].stage_cost = 1.0;
    s[k].controller_tick = k % 2 == 0;
  }
  const SimMetrics m = compute_metrics(sc, s);
  EXPECT_NEAR(m.rms_total, std::sqrt(2.0 / 4.0), 1e-15);
  EXPECT_DOUBLE_EQ(m.max_abs_error(0), 1.0);
  EXPECT_DOUBLE_EQ(m.max_overshoot(0), 1.0);
  EXPECT_DOUBLE_EQ(m.max_abs_du(0), 0.5);
  EXPECT_DOUBLE_EQ(m.violation_fraction, 0.25);
  EXPECT_DOUBLE_EQ(m.total_cost, 4.0);
  EXPECT_EQ(m.controller_steps, 2u);
}

TEST(ClosedLoop, RejectsMismatchedDesign) {
  Scenario sc = siso();
  const ControllerDesign d = design_controller(sc, ControllerKind::Continuous);
  sc.Ts_controller = 10;
  EXPECT_THROW(run_closed_loop(sc, d, generate_noise(sc)), std::invalid_argument);
}
