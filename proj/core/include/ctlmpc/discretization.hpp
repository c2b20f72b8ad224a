#pragma once

#include "ctlmpc/realization.hpp"
#include "ctlmpc/types.hpp"

#include <vector>

namespace ctlmpc {

/// Scaling-and-squaring matrix exponential. Throws std::invalid_argument for
/// non-square input.
Matrix expm(const Matrix& a);

/// delay = (whole_steps - fraction) * Ts with whole_steps >= 0, fraction in [0, 1).
struct DelaySplit {
  Index whole_steps = 0;
  double fraction = 0.0;
};
DelaySplit split_delay(double delay, double Ts);

/// x+ = A x + B u, z = C x + D u.
struct DiscreteLti {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;
  double Ts = 0.0;

  Index n_x() const { return A.rows(); }
  Index n_u() const { return B.cols(); }
  Index n_z() const { return C.rows(); }
};

/// ZOH discretization of one delayed channel. The state is augmented with
/// `whole_steps` past inputs, oldest first: [x; u_{k-m}; ...; u_{k-1}].
DiscreteLti zoh_discretize(const DelayedSisoSS& ss, double Ts);

/// A continuous MIMO block with one common input delay. Its inputs and outputs
/// index into the global input/output vectors; outputs of blocks are summed.
struct DelayedBlock {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;
  double delay = 0.0;
  std::vector<Index> inputs;
  std::vector<Index> outputs;
};

DelayedBlock as_block(const DelayedSisoSS& ss);

/// Quadratic stage cost of one sampling interval, over v = [x_k; u_k]:
///   l_k = 1/2 v' Q v + (M r_k)' v + rho_k,   r_k = [zbar_k; ubar_k].
struct TrackingCost {
  Matrix Q;
  Matrix M;
  // 1/2 r' R r equals rho_k; R = Ts * blockdiag(Q_cz, Q_cu) up to rounding.
  Matrix R;
};

/// Sampled stack of delayed blocks: the augmented ZOH system and the exact
/// sampled equivalents of continuous quadratic costs over it.
class SampledModel {
 public:
  SampledModel(std::vector<DelayedBlock> blocks, Index n_out, Index n_in, double Ts);
  static SampledModel from_channels(const std::vector<DelayedSisoSS>& channels, Index n_out, Index n_in,
                                    double Ts);

  const DiscreteLti& system() const { return system_; }
  double Ts() const { return Ts_; }
  Index n_x() const { return system_.n_x(); }
  Index n_u() const { return n_in_; }
  Index n_z() const { return n_out_; }

  /// Exact sampled cost of 1/2 int_0^Ts [z - zbar; u - ubar]' Qc [z - zbar; u - ubar] dt.
  /// Qc is (n_z + n_u) square and must be PSD.
  TrackingCost tracking_cost(const Matrix& Qc) const;

  /// Instants in (0, Ts) where some block switches between held inputs.
  std::vector<double> switch_times() const;

 private:
  struct Layout {
    Index state_offset = 0;  // x_c of the block inside the augmented state
    Index order = 0;
    Index buffer_offset = 0;  // first held-input slot (oldest)
    DelaySplit split;
  };

  // Column of the held input driving block b at time t in [0, Ts): a slot in
  // the augmented state or, for delay-free parts, the current input.
  Index source_column(std::size_t b, double t) const;

  std::vector<DelayedBlock> blocks_;
  std::vector<Layout> layout_;
  Index n_out_;
  Index n_in_;
  double Ts_;
  DiscreteLti system_;
};

/// Exact sampled tracking cost of a delay-free system.
TrackingCost discretize_tracking_cost(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D,
                                      const Matrix& Qc, double Ts);

/// int_0^Ts e^{A t} B B' e^{A' t} dt via the block exponential of [[-A, BB'], [0, A']] Ts.
Matrix process_noise_cov(const Matrix& A, const Matrix& B, double Ts);

/// 1/2 [zbar; ubar]' Qc [zbar; ubar] Ts.
double rho(const Vector& zbar, const Vector& ubar, const Matrix& Qc, double Ts);

/// Continuous-time objective weights. Integrand weights are per unit time;
/// Q_cdu weighs the squared input rate.
struct ContinuousWeights {
  Matrix Q_cz;
  Matrix Q_cu;
  Matrix Q_cdu;
  Vector q_ceco;
  Matrix Q_cxi;
  Matrix Q_ceta;
  Vector q_cxi;
  Vector q_ceta;

  static ContinuousWeights zeros(Index n_z, Index n_u);

  /// Re-expresses weights stated for a time axis of `seconds_per_unit` seconds
  /// on a seconds axis, preserving the value of every integral.
  ContinuousWeights in_seconds(double seconds_per_unit) const;

  /// blockdiag(Q_cz, Q_cu)
  Matrix tracking_weight() const;

  bool operator==(const ContinuousWeights& other) const;
};

/// Discrete equivalents of every continuous penalty at sampling time Ts.
struct DiscreteCost {
  TrackingCost tracking;
  Matrix Q_du;      // Q_cdu / Ts
  Matrix Q_du_bar;  // [[Q_du, -Q_du], [-Q_du, Q_du]]
  Vector q_eco;     // q_ceco Ts
  Matrix Q_xi;
  Matrix Q_eta;
  Vector q_xi;
  Vector q_eta;
  Matrix tracking_weight;  // Qc, kept for rho
  double Ts = 0.0;

  double rho(const Vector& zbar, const Vector& ubar) const;
};

DiscreteCost discretize_cost(const SampledModel& model, const ContinuousWeights& weights);

/// Throws std::invalid_argument if `m` is not symmetric PSD within tolerance.
void require_psd(const Matrix& m, const char* what);

}  // namespace ctlmpc
