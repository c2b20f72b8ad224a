#pragma once

#include "ctlmpc/discretization.hpp"
#include "ctlmpc/estimation.hpp"
#include "ctlmpc/qp_solver.hpp"
#include "ctlmpc/realization.hpp"
#include "ctlmpc/types.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ctlmpc {

/// x_k = A^k x_0 + Gamma_k u for k = 0..N, u = [u_0; ...; u_{N-1}].
class Condensing {
 public:
  Condensing() = default;
  Condensing(const Matrix& A, const Matrix& B, std::size_t N);

  std::size_t horizon() const { return N_; }
  const Matrix& power(std::size_t k) const { return powers_.at(k); }
  const Matrix& gamma(std::size_t k) const { return gammas_.at(k); }
  Vector state(std::size_t k, const Vector& x0, const Vector& u) const { return power(k) * x0 + gamma(k) * u; }

 private:
  std::size_t N_ = 0;
  std::vector<Matrix> powers_;
  std::vector<Matrix> gammas_;
};

Condensing build_condensing(const Matrix& A, const Matrix& B, std::size_t N);

/// 1/2 u' H u + g' u
struct QuadraticTerm {
  Matrix H;
  Vector g;
};

/// H = sum_k [Gamma_k; I_k]' Q [Gamma_k; I_k], g = sum_k [Gamma_k; I_k]' (Q [b_k; 0] + q_k), k = 0..N-1.
QuadraticTerm build_tracking_block(const Condensing& cond, const Matrix& Q, const std::vector<Vector>& q,
                                   const Vector& x0);

/// Input rate-of-movement and economic terms; the u_{-1} term enters once.
QuadraticTerm build_rom_eco_block(std::size_t N, const Matrix& Q_du, const Vector& q_eco, const Vector& u_prev);

/// Over [xi_1..xi_N, eta_1..eta_N].
QuadraticTerm build_soft_block(const Matrix& Q_xi, const Matrix& Q_eta, const Vector& q_xi, const Vector& q_eta,
                               std::size_t N);

/// Hard input/rate limits and soft output bounds; +-kInf where absent.
struct ControlLimits {
  Vector u_min;
  Vector u_max;
  Vector du_min;
  Vector du_max;
  Vector z_min;
  Vector z_max;

  static ControlLimits unbounded(Index n_z, Index n_u);
  bool has_rate_bounds() const;
  bool has_output_bounds() const;
  /// Throws std::invalid_argument listing every inconsistent bound.
  void validate() const;

  bool operator==(const ControlLimits& other) const;
};

enum class ControllerKind { Continuous, Discrete };
const char* to_string(ControllerKind kind);

/// Immutable once built.
struct ControllerDesign {
  ControllerKind kind = ControllerKind::Continuous;
  std::size_t N = 0;
  double Ts = 0.0;
  Index n_x = 0;
  Index n_u = 0;
  Index n_z = 0;

  DiscreteLti det;
  StationaryFilter filter;
  Matrix R_ww;
  Matrix R_vv;

  DiscreteCost cost;             // continuous design
  ContinuousWeights dt_weights;  // discrete baseline, used without Ts scaling
  ControlLimits limits;

  Condensing condensing;
  std::vector<Matrix> output_maps;  // Z_j = C Gamma_j + D I_{min(j, N-1)}, j = 0..N
  bool soft = false;
  Index n_decision = 0;
  Matrix H;
  Vector g_soft;
  Matrix constraint_matrix;
  double hessian_min_eigenvalue = 0.0;

  Index xi_offset() const { return static_cast<Index>(N) * n_u; }
  Index eta_offset() const { return xi_offset() + static_cast<Index>(N) * n_z; }
};

/// CT-LMPC: exact discrete equivalents of the continuous objective at Ts.
/// Weights are per second.
ControllerDesign design_ct_lmpc(const NsRealization& model, const ContinuousWeights& weights,
                                const ControlLimits& limits, std::size_t N, double Ts, const Matrix& R_vv);

/// DT-LMPC: sum_k |z_{k+1} - zbar_{k+1}|^2_Qcz + |u_k - u_{k-1}|^2_Qcdu with weights used as given.
ControllerDesign build_dt_baseline(const NsRealization& model, const ContinuousWeights& weights,
                                   const ControlLimits& limits, std::size_t N, double Ts, const Matrix& R_vv);

struct StepInputs {
  std::vector<Vector> z_ref;  // stages k..k+N; a shorter preview holds its last value
  std::vector<Vector> u_ref;  // stages k..k+N-1; empty means zero
  Vector y;
};

struct ControllerState {
  Vector xd;  // deterministic model state, propagated open loop
  FilterState filter;
  Vector u_prev;
  std::optional<Vector> warm_start;
};

ControllerState initial_state(const ControllerDesign& design, const Vector& u_prev);

struct StepResult {
  Vector u;
  Vector xi;   // first-stage slacks (empty without soft constraints)
  Vector eta;
  QpSolution qp;
  double objective = 0.0;      // QP objective plus decision-independent terms
  std::vector<Vector> zs_pred;  // z^s_{k+j|k}, j = 0..N
  Vector innovation;
};

class QpFailure : public std::runtime_error {
 public:
  QpFailure(const std::string& what, QpSolution solution)
      : std::runtime_error(what), solution_(std::move(solution)) {}
  const QpSolution& solution() const { return solution_; }

 private:
  QpSolution solution_;
};

/// Condensed QP of one receding-horizon step.
QpProblem assemble_qp(const ControllerDesign& design, const ControllerState& state, const StepInputs& inputs,
                      const std::vector<Vector>& zs_pred);

/// Filter, predict, assemble, solve, apply the first input. Mutates only `state`.
StepResult step(const ControllerDesign& design, ControllerState& state, const StepInputs& inputs);

/// Owns one control loop.
class Controller {
 public:
  Controller(std::shared_ptr<const ControllerDesign> design, const Vector& u_prev);

  StepResult step(const StepInputs& inputs) { return ctlmpc::step(*design_, state_, inputs); }
  const ControllerDesign& design() const { return *design_; }
  const ControllerState& state() const { return state_; }

 private:
  std::shared_ptr<const ControllerDesign> design_;
  ControllerState state_;
};

}  // namespace ctlmpc
