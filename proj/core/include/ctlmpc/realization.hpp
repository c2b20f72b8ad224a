#pragma once

#include "ctlmpc/transfer_model.hpp"
#include "ctlmpc/types.hpp"

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

namespace ctlmpc {

/// Continuous SISO channel x' = A x + B u_j(t - delay), z_i = C x + D u_j(t - delay).
struct DelayedSisoSS {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;
  double delay = 0.0;
  std::size_t input = 0;
  std::size_t output = 0;

  Index order() const { return A.rows(); }
};

/// C (sI - A)^{-1} B + D, times e^{-delay s}.
std::complex<double> frequency_response(const DelayedSisoSS& ss, std::complex<double> s);

/// Controllable companion form of a proper transfer function. Delay is carried
/// as metadata. A static gain yields an empty state with D = b0 / a0.
DelayedSisoSS realize_siso(const RationalTransfer& tf, std::size_t output = 0, std::size_t input = 0);

/// dx = A x dt + B dw, z^s = C x.
struct StochasticSS {
  Matrix A;
  Matrix B;
  Matrix C;

  Index order() const { return A.rows(); }
};

/// Noise-separation realization: one delayed SISO model per deterministic
/// channel (ordered column-major: x_11, x_21, ..., x_{nz nu}) plus the stacked
/// stochastic model.
struct NsRealization {
  std::vector<DelayedSisoSS> det_channels;
  StochasticSS stoch;
  std::size_t n_z = 0;
  std::size_t n_u = 0;
  std::size_t n_w = 0;
  // Covariance of the stochastic initial state; x0^s = 0 by construction.
  std::optional<Matrix> initial_stoch_cov;

  const DelayedSisoSS& channel(std::size_t i, std::size_t j) const { return det_channels.at(j * n_z + i); }
};

/// Realizes every row of a (rows x cols) matrix of channels, skipping zero entries.
std::vector<DelayedSisoSS> realize_channels(const TransferMatrix& model);

NsRealization realize_ns(const TransferMatrix& G, const TransferMatrix& H);

}  // namespace ctlmpc
