#pragma once

#include "ctlmpc/types.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ctlmpc {

class DareError : public std::runtime_error {
 public:
  enum class Kind { NotDetectable, Diverged, SingularInnovation, BadDimensions };
  DareError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Stationary Kalman filter of x+ = A x + w, y = C x + v.
struct StationaryFilter {
  Matrix A;
  Matrix C;
  Matrix P;   // stationary one-step prediction covariance
  Matrix Re;  // innovation covariance C P C' + R_vv
  Matrix K;   // filter gain P C' Re^{-1}
  std::size_t iterations = 0;
  double residual = 0.0;  // max-norm DARE residual at P
};

/// Unobservable modes strictly inside the unit circle (PBH test).
bool is_detectable(const Matrix& A, const Matrix& C, double tol = 1e-9);

/// || P - (A P A' - A P C' (C P C' + Rvv)^{-1} C P A' + Rww) ||_inf
double dare_residual(const Matrix& A, const Matrix& C, const Matrix& Rww, const Matrix& Rvv, const Matrix& P);

/// Fixed-point Riccati iteration to ||P_{n+1} - P_n||_inf <= 1e-12 max(1, ||P||).
StationaryFilter solve_dare(const Matrix& A, const Matrix& C, const Matrix& Rww, const Matrix& Rvv,
                            std::size_t max_iterations = 1'000'000);

struct FilterState {
  Vector xs;  // x^s_{k|k}
  Vector zd;  // last deterministic output used in the innovation
};

FilterState initial_filter_state(const StationaryFilter& f);

/// x^s_{k|k-1} = A x^s_{k-1|k-1}; e_k = (y - zd) - C x^s_{k|k-1}; x^s_{k|k} = x^s_{k|k-1} + K e_k.
FilterState filter_update(const StationaryFilter& f, const FilterState& state, const Vector& y,
                          const Vector& zd_hat);

/// Innovation e_k the update would use.
Vector innovation(const StationaryFilter& f, const FilterState& state, const Vector& y, const Vector& zd_hat);

/// z^s_{k+j|k} = C A^j x^s_{k|k}, j = 1..N.
std::vector<Vector> predict_outputs(const StationaryFilter& f, const FilterState& state, std::size_t N);

/// zhat_{k+j|k} = zd_{k+j|k} + zs_{k+j|k}; both sequences indexed alike.
std::vector<Vector> compose_predictions(const std::vector<Vector>& deterministic,
                                        const std::vector<Vector>& stochastic);

}  // namespace ctlmpc
