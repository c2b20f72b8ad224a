#include "ctlmpc/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ctlmpc {

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Solved: return "solved";
    case QpStatus::MaxIterations: return "max-iterations";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::NonConvex: return "non-convex";
  }
  return "unknown";
}

std::string QpSolution::summary() const {
  std::ostringstream out;
  out << "status=" << to_string(status) << " iterations=" << iterations
      << " stationarity=" << residuals.stationarity << " primal=" << residuals.primal
      << " complementarity=" << residuals.complementarity << " gap=" << residuals.duality_gap;
  if (status == QpStatus::NonConvex) out << " min_eigenvalue=" << min_eigenvalue;
  return out.str();
}

double objective_scale(const QpProblem& p) {
  const double h = p.H.size() ? p.H.cwiseAbs().maxCoeff() : 0.0;
  const double g = p.g.size() ? p.g.cwiseAbs().maxCoeff() : 0.0;
  const double s = std::max(h, g);
  return s > 0.0 ? s : 1.0;
}

namespace {

bool finite_bound(double b) { return std::abs(b) < kQpDropThreshold; }

void check_problem(const QpProblem& p) {
  const Index n = p.H.rows();
  if (p.H.cols() != n || p.g.size() != n) throw std::invalid_argument("qp: H/g dimension mismatch");
  if (p.A.cols() != n && p.A.rows() > 0) throw std::invalid_argument("qp: A has wrong column count");
  if (p.lower.size() != p.A.rows() || p.upper.size() != p.A.rows()) {
    throw std::invalid_argument("qp: bound vectors must match rows of A");
  }
  if (!p.H.allFinite() || !p.g.allFinite() || !p.A.allFinite()) throw std::invalid_argument("qp: non-finite data");
  const double scale = std::max(1.0, p.H.size() ? p.H.cwiseAbs().maxCoeff() : 0.0);
  if (n > 0 && (p.H - p.H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("qp: H is not symmetric");
  }
  for (Index i = 0; i < p.A.rows(); ++i) {
    if (p.lower(i) > p.upper(i)) {
      std::ostringstream msg;
      msg << "qp: row " << i << " has lower bound " << p.lower(i) << " above upper bound " << p.upper(i);
      throw std::invalid_argument(msg.str());
    }
  }
}

// One-sided constraint sign * (row' x) - rhs >= 0, where row is either a
// dense general row of A or coef * e_var.
struct Constraint {
  Index row;
  Index general;  // index into the general block, -1 for a variable bound
  Index var;
  double coef;
  double sign;
  double rhs;
};

struct Structure {
  Matrix general;                // dense rows with two or more nonzeros
  std::vector<Index> general_rows;
  std::vector<Constraint> cons;
};

Structure classify(const QpProblem& p) {
  Structure st;
  std::vector<Index> gen;
  for (Index i = 0; i < p.A.rows(); ++i) {
    const bool has_lower = finite_bound(p.lower(i));
    const bool has_upper = finite_bound(p.upper(i));
    if (!has_lower && !has_upper) continue;
    Index nnz = 0;
    Index var = -1;
    for (Index j = 0; j < p.A.cols(); ++j) {
      if (p.A(i, j) != 0.0) {
        ++nnz;
        var = j;
      }
    }
    if (nnz == 0) {
      if ((has_lower && p.lower(i) > 1e-12) || (has_upper && p.upper(i) < -1e-12)) {
        throw std::invalid_argument("qp: zero constraint row with unsatisfiable bounds");
      }
      continue;
    }
    Index general = -1;
    double coef = 0.0;
    if (nnz == 1) {
      coef = p.A(i, var);
    } else {
      general = static_cast<Index>(gen.size());
      gen.push_back(i);
      var = -1;
    }
    if (has_lower) st.cons.push_back({i, general, var, coef, 1.0, p.lower(i)});
    if (has_upper) st.cons.push_back({i, general, var, coef, -1.0, -p.upper(i)});
  }
  st.general.resize(static_cast<Index>(gen.size()), p.A.cols());
  for (std::size_t k = 0; k < gen.size(); ++k) st.general.row(static_cast<Index>(k)) = p.A.row(gen[k]);
  st.general_rows = std::move(gen);
  return st;
}

// c_i' x for every one-sided constraint.
Vector apply_constraints(const Structure& st, const Vector& x) {
  const Vector gx = st.general * x;
  Vector out(static_cast<Index>(st.cons.size()));
  for (std::size_t k = 0; k < st.cons.size(); ++k) {
    const Constraint& c = st.cons[k];
    out(static_cast<Index>(k)) = c.sign * (c.general >= 0 ? gx(c.general) : c.coef * x(c.var));
  }
  return out;
}

// sum_i v_i c_i
Vector apply_transpose(const Structure& st, const Vector& v, Index n) {
  Vector gen = Vector::Zero(st.general.rows());
  Vector out = Vector::Zero(n);
  for (std::size_t k = 0; k < st.cons.size(); ++k) {
    const Constraint& c = st.cons[k];
    const double val = c.sign * v(static_cast<Index>(k));
    if (c.general >= 0) {
      gen(c.general) += val;
    } else {
      out(c.var) += c.coef * val;
    }
  }
  if (gen.size() > 0) out.noalias() += st.general.transpose() * gen;
  return out;
}

double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

double worst(const QpResiduals& r) { return std::max({r.stationarity, r.primal, r.complementarity}); }

// Equality-constrained solve on the active set the interior point settled on.
// Returns nothing unless the result is primal and dual feasible.
std::optional<std::pair<Vector, Vector>> polish(const Structure& st, const Matrix& H, const Vector& g,
                                                  const Vector& d, const Vector& x, const Vector& s,
                                                  const Vector& lam) {
  const Index n = H.rows();
  const auto m = static_cast<Index>(st.cons.size());
  std::vector<Index> active;
  for (Index k = 0; k < m; ++k) {
    if (s(k) < lam(k)) active.push_back(k);
  }
  const auto na = static_cast<Index>(active.size());
  if (na > n) return std::nullopt;
  Matrix C = Matrix::Zero(na, n);
  Vector e = Vector::Zero(na);
  for (Index a = 0; a < na; ++a) {
    const Constraint& c = st.cons[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])];
    if (c.general >= 0) {
      C.row(a) = c.sign * st.general.row(c.general);
    } else {
      C(a, c.var) = c.sign * c.coef;
    }
    e(a) = c.rhs;
  }
  Matrix K = Matrix::Zero(n + na, n + na);
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, na) = C.transpose();
  K.bottomLeftCorner(na, n) = C;
  Vector rhs(n + na);
  rhs << -g, e;
  const Vector sol = K.partialPivLu().solve(rhs);
  if (!sol.allFinite()) return std::nullopt;
  Vector xp = sol.head(n);
  Vector lp = Vector::Zero(m);
  const double tol = 1e-9 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (Index a = 0; a < na; ++a) {
    const double v = -sol(n + a);
    if (v < -tol) return std::nullopt;
    lp(active[static_cast<std::size_t>(a)]) = std::max(v, 0.0);
  }
  const Vector slack = apply_constraints(st, xp) - d;
  const double dnorm = std::max(1.0, d.cwiseAbs().maxCoeff());
  if (slack.minCoeff() < -1e-9 * dnorm) return std::nullopt;
  if ((xp - x).cwiseAbs().maxCoeff() > 1e-3 * std::max(1.0, x.cwiseAbs().maxCoeff())) return std::nullopt;
  return std::make_pair(std::move(xp), std::move(lp));
}

}  // namespace

QpResiduals kkt_residuals(const QpProblem& p, const Vector& w, const Vector& lambda) {
  const double scale = objective_scale(p);
  QpResiduals r;
  const Vector aw = p.A * w;
  Vector grad = p.H * w + p.g;
  if (p.A.rows() > 0) grad += p.A.transpose() * lambda;
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() / scale : 0.0;

  double dual = -0.5 * w.dot(p.H * w);
  for (Index i = 0; i < p.A.rows(); ++i) {
    const bool has_lower = finite_bound(p.lower(i));
    const bool has_upper = finite_bound(p.upper(i));
    if (has_lower) r.primal = std::max(r.primal, p.lower(i) - aw(i));
    if (has_upper) r.primal = std::max(r.primal, aw(i) - p.upper(i));
    const double l = lambda(i);
    if (l > 0.0) {
      const double dist = has_upper ? std::abs(p.upper(i) - aw(i)) : kInf;
      r.complementarity = std::max(r.complementarity, l * dist / scale);
      if (has_upper) dual -= l * p.upper(i);
    } else if (l < 0.0) {
      const double dist = has_lower ? std::abs(aw(i) - p.lower(i)) : kInf;
      r.complementarity = std::max(r.complementarity, -l * dist / scale);
      if (has_lower) dual -= l * p.lower(i);
    }
  }
  r.duality_gap = std::abs(p.objective(w) - dual) / scale;
  return r;
}

QpSolution solve(const QpProblem& problem, const std::optional<Vector>& warm_start, const QpOptions& options) {
  check_problem(problem);
  const Index n = problem.n();
  const double scale = objective_scale(problem);
  const Matrix H = problem.H / scale;
  const Vector g = problem.g / scale;

  QpSolution sol;
  sol.objective_scale = scale;
  sol.regularization = options.regularization;

  if (options.check_convexity && n > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(H), Eigen::EigenvaluesOnly);
    sol.min_eigenvalue = eig.eigenvalues().minCoeff() * scale;
    if (eig.eigenvalues().minCoeff() < -1e-10) {
      sol.status = QpStatus::NonConvex;
      sol.w = Vector::Zero(n);
      sol.lambda = Vector::Zero(problem.m());
      return sol;
    }
  }

  const Structure st = classify(problem);
  const auto m = static_cast<Index>(st.cons.size());
  Vector d(m);
  for (Index k = 0; k < m; ++k) d(k) = st.cons[static_cast<std::size_t>(k)].rhs;

  Vector x = Vector::Zero(n);
  if (warm_start && warm_start->size() == n && warm_start->allFinite()) x = *warm_start;
  Vector s = (apply_constraints(st, x) - d).cwiseMax(1.0);
  Vector lam = Vector::Ones(m);

  const double dnorm = m > 0 ? std::max(1.0, d.cwiseAbs().maxCoeff()) : 1.0;
  const Index ng = st.general.rows();

  Matrix normal(n, n);
  Matrix weighted_rows(ng, n);
  Eigen::LLT<Matrix, Eigen::Lower> llt(n);

  auto converged = [&](const Vector& rd, const Vector& rp) {
    const double stat = n ? rd.cwiseAbs().maxCoeff() : 0.0;
    const double prim = m ? rp.cwiseAbs().maxCoeff() / dnorm : 0.0;
    const double comp = m ? s.cwiseProduct(lam).maxCoeff() : 0.0;
    return stat <= options.tolerance && prim <= options.tolerance && comp <= options.tolerance;
  };

  sol.status = QpStatus::MaxIterations;
  int it = 0;
  for (; it <= options.max_iterations; ++it) {
    const Vector cx = apply_constraints(st, x);
    const Vector rd = H * x + g - apply_transpose(st, lam, n);
    const Vector rp = cx - s - d;
    if (converged(rd, rp)) {
      sol.status = QpStatus::Solved;
      break;
    }
    if (it == options.max_iterations) break;
    if (!x.allFinite() || (m > 0 && lam.cwiseAbs().maxCoeff() > 1e14)) {
      sol.status = QpStatus::Infeasible;
      break;
    }
    const double mu = m > 0 ? s.dot(lam) / static_cast<double>(m) : 0.0;

    // Normal equations (H + C' diag(lam/s) C + reg I) dx = rhs.
    const Vector wdiag = lam.cwiseQuotient(s);
    normal = H;
    normal.diagonal().array() += options.regularization;
    Vector gen_weight = Vector::Zero(ng);
    for (Index k = 0; k < m; ++k) {
      const Constraint& c = st.cons[static_cast<std::size_t>(k)];
      if (c.general >= 0) {
        gen_weight(c.general) += wdiag(k);
      } else {
        normal(c.var, c.var) += c.coef * c.coef * wdiag(k);
      }
    }
    if (ng > 0) {
      weighted_rows = gen_weight.cwiseSqrt().asDiagonal() * st.general;
      normal.selfadjointView<Eigen::Lower>().rankUpdate(weighted_rows.transpose());
    }
    llt.compute(normal);
    if (llt.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(H), Eigen::EigenvaluesOnly);
      sol.min_eigenvalue = eig.eigenvalues().minCoeff() * scale;
      sol.status = QpStatus::NonConvex;
      break;
    }

    auto direction = [&](const Vector& rc, Vector& dx, Vector& ds, Vector& dl) {
      const Vector t = rc.cwiseQuotient(s) + wdiag.cwiseProduct(rp);
      dx = llt.solve(-rd - apply_transpose(st, t, n));
      ds = apply_constraints(st, dx) + rp;
      dl = -(rc + lam.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Vector dx, ds, dl;
    Vector rc = s.cwiseProduct(lam);
    direction(rc, dx, ds, dl);
    double alpha = std::min(max_step(s, ds), max_step(lam, dl));

    if (m > 0) {
      const double mu_aff = (s + alpha * ds).dot(lam + alpha * dl) / static_cast<double>(m);
      const double sigma = std::pow(mu_aff / mu, 3);
      rc += ds.cwiseProduct(dl);
      rc.array() -= sigma * mu;
      direction(rc, dx, ds, dl);
      alpha = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(lam, dl)));
    }

    x += alpha * dx;
    s += alpha * ds;
    lam += alpha * dl;
    s = s.cwiseMax(1e-300);
    lam = lam.cwiseMax(1e-300);
  }
  sol.iterations = it;

  // Multipliers per original row: upper-side minus lower-side.
  auto row_multipliers = [&](const Vector& l) {
    Vector out = Vector::Zero(problem.m());
    for (Index k = 0; k < m; ++k) {
      const Constraint& c = st.cons[static_cast<std::size_t>(k)];
      out(c.row) -= c.sign * l(k) * scale;
    }
    return out;
  };
  sol.w = x;
  sol.lambda = row_multipliers(lam);
  sol.residuals = kkt_residuals(problem, sol.w, sol.lambda);
  if (sol.status == QpStatus::Solved && m > 0) {
    if (auto polished = polish(st, H, g, d, x, s, lam)) {
      const Vector lp = row_multipliers(polished->second);
      const QpResiduals r = kkt_residuals(problem, polished->first, lp);
      if (worst(r) <= worst(sol.residuals)) {
        sol.w = polished->first;
        sol.lambda = lp;
        sol.residuals = r;
      }
    }
  }
  sol.objective = problem.objective(sol.w);
  return sol;
}

}  // namespace ctlmpc
