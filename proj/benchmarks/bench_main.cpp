#include "ctlmpc/config.hpp"
#include "ctlmpc/controller.hpp"
#include "ctlmpc/discretization.hpp"
#include "ctlmpc/qp_solver.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace ctlmpc;

namespace {

Scenario scenario(const char* name) { return load_config(std::string(CTLMPC_SCENARIO_DIR) + "/" + name); }

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void BM_Expm(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(rng, state.range(0), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(expm(a));
}
BENCHMARK(BM_Expm)->Arg(4)->Arg(16)->Arg(64);

void BM_TrackingCost(benchmark::State& state) {
  const Scenario sc = scenario(state.range(0) == 0 ? "siso.json" : "cement_mill.json");
  const NsRealization ns = realize_ns(sc.model_G, sc.model_H);
  const SampledModel m = SampledModel::from_channels(ns.det_channels, static_cast<Index>(ns.n_z),
                                                     static_cast<Index>(ns.n_u), sc.Ts_controller);
  const Matrix Qc = sc.weights.tracking_weight();
  for (auto _ : state) benchmark::DoNotOptimize(m.tracking_cost(Qc));
}
BENCHMARK(BM_TrackingCost)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_BoxQp(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Index n = state.range(0);
  const Matrix L = random_matrix(rng, n, n);
  QpProblem qp{L * L.transpose() + Matrix::Identity(n, n), random_matrix(rng, n, 1), Matrix::Identity(n, n),
               Vector::Constant(n, -0.5), Vector::Constant(n, 0.5)};
  for (auto _ : state) benchmark::DoNotOptimize(solve(qp));
}
BENCHMARK(BM_BoxQp)->Arg(20)->Arg(120)->Unit(benchmark::kMicrosecond);

void BM_ControllerStep(benchmark::State& state) {
  const Scenario sc = scenario(state.range(0) == 0 ? "siso.json" : "cement_mill.json");
  const ControllerDesign d = design_controller(sc, ControllerKind::Continuous);
  const Index nz = d.n_z;
  StepInputs in{{Vector::Constant(nz, 1.0)}, {}, Vector::Zero(nz)};
  for (auto _ : state) {
    ControllerState st = initial_state(d, Vector::Zero(d.n_u));
    benchmark::DoNotOptimize(step(d, st, in));
  }
}
BENCHMARK(BM_ControllerStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
