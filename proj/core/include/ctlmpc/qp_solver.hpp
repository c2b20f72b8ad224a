#pragma once

#include "ctlmpc/types.hpp"

#include <optional>
#include <string>

namespace ctlmpc {

/// Bounds with magnitude above kQpDropThreshold are treated as absent.
inline constexpr double kQpInfinity = 1e20;
inline constexpr double kQpDropThreshold = 1e19;

/// minimize 1/2 w'Hw + g'w  subject to  lower <= A w <= upper.
struct QpProblem {
  Matrix H;
  Vector g;
  Matrix A;
  Vector lower;
  Vector upper;

  Index n() const { return H.rows(); }
  Index m() const { return A.rows(); }
  double objective(const Vector& w) const { return 0.5 * w.dot(H * w) + g.dot(w); }
};

enum class QpStatus { Solved, MaxIterations, Infeasible, NonConvex };
const char* to_string(QpStatus s);

/// KKT residuals, divided by the objective scale max(|H|_max, |g|_inf).
struct QpResiduals {
  double stationarity = 0.0;     // |Hw + g + A'lambda|_inf
  double primal = 0.0;           // worst bound violation (unscaled)
  double complementarity = 0.0;  // max_i |lambda_i| * distance to the bound it prices
  double duality_gap = 0.0;      // |primal objective - dual objective|
};

struct QpSolution {
  Vector w;
  Vector lambda;  // one per row of A; > 0 at an active upper bound, < 0 at a lower one
  QpStatus status = QpStatus::MaxIterations;
  int iterations = 0;
  QpResiduals residuals;
  double objective = 0.0;
  double objective_scale = 1.0;
  double regularization = 0.0;
  double min_eigenvalue = 0.0;  // filled for NonConvex

  bool ok() const { return status == QpStatus::Solved; }
  std::string summary() const;
};

struct QpOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
  double regularization = 1e-9;
  // Eigen-decomposes H up front. Callers whose H is known PSD can skip it.
  bool check_convexity = true;
};

/// Primal-dual interior point with Mehrotra predictor-corrector. Rows of A
/// with a single nonzero are handled as variable bounds. Throws
/// std::invalid_argument on malformed input (dimensions, lower > upper).
QpSolution solve(const QpProblem& problem, const std::optional<Vector>& warm_start = std::nullopt,
                 const QpOptions& options = {});

/// Residuals of an arbitrary primal/dual pair.
QpResiduals kkt_residuals(const QpProblem& problem, const Vector& w, const Vector& lambda);

double objective_scale(const QpProblem& problem);

}  // namespace ctlmpc
