#include "ctlmpc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

namespace ctlmpc {

namespace {

double inf_norm(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff(); }

Matrix riccati_map(const Matrix& A, const Matrix& C, const Matrix& Rww, const Matrix& Rvv, const Matrix& P) {
  const Matrix APCt = A * P * C.transpose();
  const Matrix S = symmetrized(C * P * C.transpose() + Rvv);
  return symmetrized(A * P * A.transpose() - APCt * S.ldlt().solve(APCt.transpose()) + Rww);
}

}  // namespace

bool is_detectable(const Matrix& A, const Matrix& C, double tol) {
  const Index n = A.rows();
  if (n == 0) return true;
  Eigen::EigenSolver<Matrix> eig(A);
  using Cplx = std::complex<double>;
  const Eigen::MatrixXcd Ac = A.cast<Cplx>();
  const Eigen::MatrixXcd Cc = C.cast<Cplx>();
  for (Index i = 0; i < n; ++i) {
    const Cplx lambda = eig.eigenvalues()(i);
    if (std::abs(lambda) < 1.0 - tol) continue;
    Eigen::MatrixXcd pbh(n + C.rows(), n);
    pbh.topRows(n) = lambda * Eigen::MatrixXcd::Identity(n, n) - Ac;
    pbh.bottomRows(C.rows()) = Cc;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
    const double smax = std::max(1.0, svd.singularValues()(0));
    if (svd.singularValues()(n - 1) <= 1e-10 * smax) return false;
  }
  return true;
}

double dare_residual(const Matrix& A, const Matrix& C, const Matrix& Rww, const Matrix& Rvv, const Matrix& P) {
  return inf_norm(P - riccati_map(A, C, Rww, Rvv, P));
}

StationaryFilter solve_dare(const Matrix& A, const Matrix& C, const Matrix& Rww, const Matrix& Rvv,
                            std::size_t max_iterations) {
  const Index n = A.rows();
  const Index p = C.rows();
  if (A.cols() != n || C.cols() != n || Rww.rows() != n || Rww.cols() != n || Rvv.rows() != p ||
      Rvv.cols() != p) {
    throw DareError(DareError::Kind::BadDimensions, "solve_dare: inconsistent dimensions");
  }
  if (!is_detectable(A, C)) {
    throw DareError(DareError::Kind::NotDetectable, "solve_dare: (A, C) is not detectable");
  }
  Eigen::LDLT<Matrix> rvv(symmetrized(Rvv));
  if (p > 0 && (rvv.info() != Eigen::Success || !rvv.isPositive() ||
                rvv.vectorD().minCoeff() <= 1e-14 * std::max(1.0, Rvv.cwiseAbs().maxCoeff()))) {
    throw DareError(DareError::Kind::SingularInnovation, "solve_dare: R_vv must be positive definite");
  }

  StationaryFilter f;
  f.A = A;
  f.C = C;
  Matrix P = symmetrized(Rww);
  std::size_t it = 0;
  bool converged = false;
  while (it < max_iterations) {
    Matrix next = riccati_map(A, C, Rww, Rvv, P);
    ++it;
    const double step = inf_norm(next - P);
    P = std::move(next);
    if (!P.allFinite()) break;
    if (step <= 1e-12 * std::max(1.0, inf_norm(P))) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw DareError(DareError::Kind::Diverged,
                    "solve_dare: Riccati iteration did not converge in " + std::to_string(it) + " iterations");
  }
  // polish down to rounding level
  double best = dare_residual(A, C, Rww, Rvv, P);
  for (int extra = 0; extra < 200 && best > 0.0; ++extra) {
    Matrix next = riccati_map(A, C, Rww, Rvv, P);
    const double r = dare_residual(A, C, Rww, Rvv, next);
    if (!(r < best)) break;
    best = r;
    P = std::move(next);
    ++it;
  }

  f.P = P;
  f.iterations = it;
  f.Re = symmetrized(C * P * C.transpose() + Rvv);
  Eigen::LLT<Matrix> re(f.Re);
  if (re.info() != Eigen::Success) {
    throw DareError(DareError::Kind::SingularInnovation, "solve_dare: innovation covariance is singular");
  }
  f.K = re.solve(C * P).transpose();
  f.residual = dare_residual(A, C, Rww, Rvv, P);
  return f;
}

FilterState initial_filter_state(const StationaryFilter& f) {
  return FilterState{Vector::Zero(f.A.rows()), Vector::Zero(f.C.rows())};
}

Vector innovation(const StationaryFilter& f, const FilterState& state, const Vector& y, const Vector& zd_hat) {
  const Vector predicted = f.A * state.xs;
  return (y - zd_hat) - f.C * predicted;
}

FilterState filter_update(const StationaryFilter& f, const FilterState& state, const Vector& y,
                          const Vector& zd_hat) {
  const Vector predicted = f.A * state.xs;
  const Vector e = (y - zd_hat) - f.C * predicted;
  return FilterState{predicted + f.K * e, zd_hat};
}

std::vector<Vector> predict_outputs(const StationaryFilter& f, const FilterState& state, std::size_t N) {
  std::vector<Vector> out;
  out.reserve(N);
  Vector x = state.xs;
  for (std::size_t j = 1; j <= N; ++j) {
    x = (f.A * x).eval();
    out.push_back(f.C * x);
  }
  return out;
}

std::vector<Vector> compose_predictions(const std::vector<Vector>& deterministic,
                                        const std::vector<Vector>& stochastic) {
  if (deterministic.size() != stochastic.size()) {
    throw std::invalid_argument("compose_predictions: sequence lengths differ");
  }
  std::vector<Vector> out(deterministic.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = deterministic[j] + stochastic[j];
  return out;
}

}  // namespace ctlmpc
