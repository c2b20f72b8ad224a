#pragma once

#include "ctlmpc/controller.hpp"
#include "ctlmpc/discretization.hpp"
#include "ctlmpc/transfer_model.hpp"
#include "ctlmpc/types.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ctlmpc {

/// x+ = A x + B u + E d + G w,  y = C x + D u + F d + v.
struct Plant {
  Matrix A;
  Matrix B;
  Matrix E;
  Matrix G;
  Matrix C;
  Matrix D;
  Matrix F;
  Matrix R_ww;
  Matrix R_vv;
  double Ts = 0.0;
  Vector x;

  Index n_u() const { return B.cols(); }
  Index n_d() const { return E.cols(); }
  Index n_z() const { return C.rows(); }

  /// Noise-free output z_k.
  Vector output(const Vector& u, const Vector& d) const { return C * x + D * u + F * d; }
  void advance(const Vector& u, const Vector& d, const Vector& w) { x = A * x + B * u + E * d + G * w; }
};

/// Joint ZOH discretization of [G Gd]; w enters through the disturbance channel (G = E).
Plant build_plant(const TransferMatrix& G, const TransferMatrix& Gd, double Ts, const Matrix& R_ww,
                  const Matrix& R_vv);

/// Piecewise-constant signal, left-continuous: value i holds on (times[i], times[i+1]].
struct Schedule {
  std::vector<double> times;  // ascending, times[0] is the start
  std::vector<Vector> values;

  static Schedule constant(const Vector& v);
  /// Point value at t.
  Vector at(double t) const;
  /// Value held just after t, i.e. on the interval starting at t.
  Vector after(double t) const;
  Index dim() const { return values.empty() ? 0 : values.front().size(); }
  /// Switch times rounded to multiples of Ts.
  Schedule snapped(double Ts) const;

  bool operator==(const Schedule& other) const;
};

enum class NoiseMode { Deterministic, Stochastic };
const char* to_string(NoiseMode mode);

struct Scenario {
  std::string name;
  // True plant, in seconds.
  TransferMatrix plant_G;
  TransferMatrix plant_Gd;
  // Control model.
  TransferMatrix model_G;
  TransferMatrix model_H;

  ContinuousWeights weights;     // per second
  ContinuousWeights dt_weights;  // used as given by the discrete baseline
  ControlLimits limits;
  std::size_t N = 20;

  double Ts = 1.0;
  double Ts_controller = 5.0;
  double T_sim = 1200.0;

  Schedule reference;
  Schedule input_reference;
  Schedule disturbance;

  Matrix R_ww;  // plant rate, disturbance channel
  Matrix R_vv;  // measurement; also used by the filter
  std::uint64_t seed = 1;
  NoiseMode mode = NoiseMode::Deterministic;

  /// Throws std::invalid_argument listing every problem.
  void validate() const;
  std::size_t ratio() const;
  std::size_t plant_steps() const;

  bool operator==(const Scenario& other) const;
};

ControllerDesign design_controller(const Scenario& scenario, ControllerKind kind);

/// Plant-rate noise, replayable across runs.
struct NoiseSequence {
  std::vector<Vector> w;
  std::vector<Vector> v;
};

/// Seeded draw; zeros in deterministic mode.
NoiseSequence generate_noise(const Scenario& scenario);

struct SimSample {
  double t = 0.0;
  Vector zbar;
  Vector y;
  Vector z;
  Vector u;
  Vector d;
  Vector xi;
  Vector eta;
  double stage_cost = 0.0;
  int qp_iterations = 0;
  bool controller_tick = false;
};

struct SimMetrics {
  Vector rms_error;          // per output
  double rms_total = 0.0;    // over all outputs
  double total_cost = 0.0;   // rectangle rule of the continuous cost
  Vector max_abs_error;
  Vector max_overshoot;
  Vector max_abs_du;
  double violation_fraction = 0.0;
  double max_kkt_residual = 0.0;
  std::size_t controller_steps = 0;
};

struct SimResult {
  ControllerKind kind = ControllerKind::Continuous;
  std::vector<SimSample> samples;
  SimMetrics metrics;
};

/// Failure of a QP inside the loop, with the controller tick it happened at.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t tick, QpSolution solution)
      : std::runtime_error(what), tick_(tick), solution_(std::move(solution)) {}
  std::size_t tick() const { return tick_; }
  const QpSolution& solution() const { return solution_; }

 private:
  std::size_t tick_;
  QpSolution solution_;
};

SimResult run_closed_loop(const Scenario& scenario, const ControllerDesign& design, const NoiseSequence& noise);
SimResult run_closed_loop(const Scenario& scenario, ControllerKind kind);

SimMetrics compute_metrics(const Scenario& scenario, const std::vector<SimSample>& samples);

struct Comparison {
  SimResult ct;
  SimResult dt;
  double rms_delta = 0.0;   // dt - ct
  double cost_delta = 0.0;
  double overshoot_delta = 0.0;  // max over outputs
};

Comparison compare_controllers(const Scenario& scenario);
Comparison compare_controllers(const Scenario& scenario, const ControllerDesign& ct, const ControllerDesign& dt);

}  // namespace ctlmpc
