#include "ctlmpc/qp_solver.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace ctlmpc;
namespace t = ctlmpc::testing;

namespace {

QpProblem box_problem(const Matrix& H, const Vector& g, const Vector& lo, const Vector& hi) {
  return QpProblem{H, g, Matrix::Identity(H.rows(), H.rows()), lo, hi};
}

}  // namespace

TEST(QpSolver, RandomBoxProblemsMatchEnumeration) {
  t::Rng rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    const Index n = 1 + trial % 6;
    const Matrix H = t::random_pd(rng, n);
    const Vector g = t::random_vector(rng, n, 3.0);
    Vector lo = t::random_vector(rng, n) - Vector::Ones(n);
    Vector hi = lo + (t::random_vector(rng, n).cwiseAbs() + 0.1 * Vector::Ones(n));
    const QpProblem qp = box_problem(H, g, lo, hi);
    const QpSolution s = solve(qp);
    ASSERT_TRUE(s.ok()) << s.summary();
    const Vector ref = t::enumerate_box_qp(H, g, lo, hi);
    EXPECT_LT((s.w - ref).cwiseAbs().maxCoeff(), 1e-7) << trial;
    EXPECT_LE(s.residuals.stationarity, 1e-8);
    EXPECT_LE(s.residuals.primal, 1e-8);
    EXPECT_LE(s.residuals.complementarity, 1e-8);
  }
}

TEST(QpSolver, DualSignConvention) {
  // min 1/2 w^2 - 2 w, w <= 1: lambda = 1 at the upper bound
  QpProblem qp{Matrix::Identity(1, 1), Vector::Constant(1, -2.0), Matrix::Identity(1, 1), Vector::Constant(1, -5.0),
               Vector::Constant(1, 1.0)};
  QpSolution s = solve(qp);
  ASSERT_TRUE(s.ok());
  EXPECT_NEAR(s.w(0), 1.0, 1e-9);
  EXPECT_NEAR(s.lambda(0), 1.0, 1e-8);
  qp.g(0) = 8.0;
  s = solve(qp);
  EXPECT_NEAR(s.w(0), -5.0, 1e-9);
  EXPECT_NEAR(s.lambda(0), -3.0, 1e-8);
  const QpResiduals r = kkt_residuals(qp, s.w, s.lambda);
  EXPECT_LE(r.stationarity, 1e-9);
}

TEST(QpSolver, GeneralRowsAndInfiniteBounds) {
  // min 1/2|w|^2 - [1 1]'w, w1 + w2 <= 1, w1 - w2 free
  Matrix A(2, 2);
  A << 1, 1, 1, -1;
  QpProblem qp{Matrix::Identity(2, 2), -Vector::Ones(2), A, Vector::Constant(2, -kInf), Vector(2)};
  qp.upper << 1.0, kInf;
  const QpSolution s = solve(qp);
  ASSERT_TRUE(s.ok()) << s.summary();
  EXPECT_NEAR(s.w(0), 0.5, 1e-9);
  EXPECT_NEAR(s.w(1), 0.5, 1e-9);
  EXPECT_NEAR(s.lambda(0), 0.5, 1e-8);
  EXPECT_NEAR(s.lambda(1), 0.0, 1e-8);
  EXPECT_NEAR(s.objective, qp.objective(s.w), 1e-12);
}

TEST(QpSolver, UnconstrainedAndEquality) {
  const Matrix H = (Matrix(2, 2) << 2, 1, 1, 2).finished();
  const Vector g = (Vector(2) << 1, -1).finished();
  QpProblem qp{H, g, Matrix::Zero(0, 2), Vector(0), Vector(0)};
  QpSolution s = solve(qp);
  ASSERT_TRUE(s.ok());
  EXPECT_LT((s.w + H.ldlt().solve(g)).norm(), 1e-10);
  Matrix A(1, 2);
  A << 1, 1;
  qp = QpProblem{H, g, A, Vector::Constant(1, 2.0), Vector::Constant(1, 2.0)};
  s = solve(qp);
  ASSERT_TRUE(s.ok()) << s.summary();
  EXPECT_NEAR(s.w.sum(), 2.0, 1e-9);
  EXPECT_NEAR(s.w(0) - s.w(1), -2.0 / 1.0, 1e-8);
}

TEST(QpSolver, DetectsInfeasibleAndNonConvex) {
  Matrix A(2, 1);
  A << 1, 1;
  QpProblem qp{Matrix::Identity(1, 1), Vector::Zero(1), A, Vector(2), Vector(2)};
  qp.lower << 1.0, -kInf;
  qp.upper << kInf, -1.0;
  EXPECT_EQ(solve(qp).status, QpStatus::Infeasible);

  QpProblem nc = box_problem(-Matrix::Identity(2, 2), Vector::Zero(2), -Vector::Ones(2), Vector::Ones(2));
  const QpSolution s = solve(nc);
  EXPECT_EQ(s.status, QpStatus::NonConvex);
  EXPECT_LT(s.min_eigenvalue, 0.0);

  EXPECT_THROW(solve(box_problem(Matrix::Identity(1, 1), Vector::Zero(1), Vector::Ones(1), Vector::Zero(1))),
               std::invalid_argument);
  EXPECT_THROW(solve(QpProblem{Matrix::Identity(2, 2), Vector::Zero(1), Matrix::Zero(0, 2), Vector(0), Vector(0)}),
               std::invalid_argument);
}

TEST(QpSolver, WarmStartGivesSameAnswer) {
  t::Rng rng(7);
  const Index n = 12;
  const Matrix H = t::random_pd(rng, n);
  const Vector g = t::random_vector(rng, n, 5.0);
  const QpProblem qp = box_problem(H, g, -Vector::Ones(n), Vector::Ones(n));
  const QpSolution cold = solve(qp);
  const QpSolution warm = solve(qp, cold.w);
  ASSERT_TRUE(cold.ok());
  ASSERT_TRUE(warm.ok());
  EXPECT_LT((cold.w - warm.w).norm(), 1e-8);
  const QpSolution outside = solve(qp, Vector::Constant(n, 50.0));
  ASSERT_TRUE(outside.ok());
  EXPECT_LT((cold.w - outside.w).norm(), 1e-8);
}

TEST(QpSolver, StatusNames) {
  EXPECT_STREQ(to_string(QpStatus::Solved), "solved");
  EXPECT_STREQ(to_string(QpStatus::Infeasible), "infeasible");
}
