#include "ctlmpc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace ctlmpc {

Condensing::Condensing(const Matrix& A, const Matrix& B, std::size_t N) : N_(N) {
  if (N == 0) throw std::invalid_argument("build_condensing: N must be at least 1");
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw std::invalid_argument("build_condensing: inconsistent A/B dimensions");
  }
  const Index nx = A.rows();
  const Index nu = B.cols();
  const Index n = static_cast<Index>(N) * nu;
  powers_.reserve(N + 1);
  gammas_.reserve(N + 1);
  powers_.push_back(Matrix::Identity(nx, nx));
  gammas_.push_back(Matrix::Zero(nx, n));
  for (std::size_t k = 0; k < N; ++k) {
    powers_.push_back(A * powers_.back());
    Matrix next = A * gammas_.back();
    next.middleCols(static_cast<Index>(k) * nu, nu) += B;
    gammas_.push_back(std::move(next));
  }
}

Condensing build_condensing(const Matrix& A, const Matrix& B, std::size_t N) { return Condensing(A, B, N); }

namespace {

// [Gamma_k; I_k]
Matrix stage_map(const Condensing& cond, std::size_t k, Index nu) {
  const Matrix& G = cond.gamma(k);
  Matrix S = Matrix::Zero(G.rows() + nu, G.cols());
  S.topRows(G.rows()) = G;
  S.bottomRows(nu).middleCols(static_cast<Index>(k) * nu, nu).setIdentity();
  return S;
}

Matrix tracking_hessian(const Condensing& cond, const Matrix& Q, Index nu) {
  const Index n = static_cast<Index>(cond.horizon()) * nu;
  Matrix H = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < cond.horizon(); ++k) {
    const Matrix S = stage_map(cond, k, nu);
    H.noalias() += S.transpose() * (Q * S);
  }
  return symmetrized(H);
}

Vector tracking_gradient(const Condensing& cond, const Matrix& Q, const std::vector<Vector>& q, const Vector& x0,
                         Index nu) {
  const std::size_t N = cond.horizon();
  const Index nx = x0.size();
  Vector g = Vector::Zero(static_cast<Index>(N) * nu);
  for (std::size_t k = 0; k < N; ++k) {
    const Vector b = cond.power(k) * x0;
    const Vector v = Q.leftCols(nx) * b + q.at(k);
    g.noalias() += cond.gamma(k).transpose() * v.head(nx);
    g.segment(static_cast<Index>(k) * nu, nu) += v.tail(nu);
  }
  return g;
}

Vector hold_at(const std::vector<Vector>& seq, std::size_t j, Index size) {
  if (seq.empty()) return Vector::Zero(size);
  const Vector& v = seq[std::min(j, seq.size() - 1)];
  if (v.size() != size) throw std::invalid_argument("controller: reference has wrong dimension");
  return v;
}

}  // namespace

QuadraticTerm build_tracking_block(const Condensing& cond, const Matrix& Q, const std::vector<Vector>& q,
                                   const Vector& x0) {
  const Index nx = cond.power(0).rows();
  const Index nu = Q.rows() - nx;
  if (q.size() < cond.horizon()) throw std::invalid_argument("build_tracking_block: need N linear terms");
  return {tracking_hessian(cond, Q, nu), tracking_gradient(cond, Q, q, x0, nu)};
}

QuadraticTerm build_rom_eco_block(std::size_t N, const Matrix& Q_du, const Vector& q_eco, const Vector& u_prev) {
  const Index nu = Q_du.rows();
  const Index n = static_cast<Index>(N) * nu;
  QuadraticTerm t{Matrix::Zero(n, n), Vector::Zero(n)};
  for (std::size_t k = 0; k < N; ++k) {
    const Index i = static_cast<Index>(k) * nu;
    t.H.block(i, i, nu, nu) += Q_du;
    if (k > 0) {
      t.H.block(i - nu, i - nu, nu, nu) += Q_du;
      t.H.block(i, i - nu, nu, nu) -= Q_du;
      t.H.block(i - nu, i, nu, nu) -= Q_du;
    }
    t.g.segment(i, nu) = q_eco;
  }
  t.g.head(nu) -= Q_du * u_prev;
  return t;
}

QuadraticTerm build_soft_block(const Matrix& Q_xi, const Matrix& Q_eta, const Vector& q_xi, const Vector& q_eta,
                               std::size_t N) {
  if (N == 0) throw std::invalid_argument("build_soft_block: N must be at least 1");
  const Index nz = Q_xi.rows();
  const Index n = 2 * static_cast<Index>(N) * nz;
  QuadraticTerm t{Matrix::Zero(n, n), Vector::Zero(n)};
  const Index half = static_cast<Index>(N) * nz;
  for (std::size_t j = 0; j < N; ++j) {
    const Index i = static_cast<Index>(j) * nz;
    t.H.block(i, i, nz, nz) = Q_xi;
    t.H.block(half + i, half + i, nz, nz) = Q_eta;
    t.g.segment(i, nz) = q_xi;
    t.g.segment(half + i, nz) = q_eta;
  }
  return t;
}

ControlLimits ControlLimits::unbounded(Index n_z, Index n_u) {
  ControlLimits l;
  l.u_min = Vector::Constant(n_u, -kInf);
  l.u_max = Vector::Constant(n_u, kInf);
  l.du_min = Vector::Constant(n_u, -kInf);
  l.du_max = Vector::Constant(n_u, kInf);
  l.z_min = Vector::Constant(n_z, -kInf);
  l.z_max = Vector::Constant(n_z, kInf);
  return l;
}

bool ControlLimits::has_rate_bounds() const {
  return (du_min.array() > -kQpDropThreshold).any() || (du_max.array() < kQpDropThreshold).any();
}

bool ControlLimits::has_output_bounds() const {
  return (z_min.array() > -kQpDropThreshold).any() || (z_max.array() < kQpDropThreshold).any();
}

void ControlLimits::validate() const {
  std::ostringstream issues;
  auto check = [&](const Vector& lo, const Vector& hi, const char* name) {
    if (lo.size() != hi.size()) {
      issues << "  " << name << ": min/max sizes differ\n";
      return;
    }
    for (Index i = 0; i < lo.size(); ++i) {
      if (std::isnan(lo(i)) || std::isnan(hi(i)) || lo(i) > hi(i)) {
        issues << "  " << name << "[" << i << "]: min " << lo(i) << " > max " << hi(i) << "\n";
      }
    }
  };
  check(u_min, u_max, "u");
  check(du_min, du_max, "du");
  check(z_min, z_max, "z");
  if (u_min.size() != du_min.size()) issues << "  u and du bounds have different sizes\n";
  const std::string s = issues.str();
  if (!s.empty()) throw std::invalid_argument("inconsistent control limits:\n" + s);
}

bool ControlLimits::operator==(const ControlLimits& o) const {
  auto same = [](const Vector& a, const Vector& b) { return a.size() == b.size() && a == b; };
  return same(u_min, o.u_min) && same(u_max, o.u_max) && same(du_min, o.du_min) && same(du_max, o.du_max) &&
         same(z_min, o.z_min) && same(z_max, o.z_max);
}

const char* to_string(ControllerKind kind) { return kind == ControllerKind::Continuous ? "ct" : "dt"; }

namespace {

struct CommonParts {
  SampledModel model;
  StationaryFilter filter;
  Matrix R_ww;
};

CommonParts common_parts(const NsRealization& model, double Ts, const Matrix& R_vv) {
  if (!(Ts > 0.0)) throw std::invalid_argument("controller: Ts must be positive");
  SampledModel sampled = SampledModel::from_channels(model.det_channels, static_cast<Index>(model.n_z),
                                                     static_cast<Index>(model.n_u), Ts);
  const StochasticSS& s = model.stoch;
  const Matrix As = expm(s.A * Ts);
  const Matrix Rww = process_noise_cov(s.A, s.B, Ts);
  if (R_vv.rows() != static_cast<Index>(model.n_z) || R_vv.cols() != R_vv.rows()) {
    throw std::invalid_argument("controller: R_vv must be n_z x n_z");
  }
  StationaryFilter f = solve_dare(As, s.C, Rww, R_vv);
  return {std::move(sampled), std::move(f), Rww};
}

void init_shape(ControllerDesign& d, const CommonParts& parts, const ControlLimits& limits, std::size_t N,
                double Ts, const Matrix& R_vv) {
  if (N == 0) throw std::invalid_argument("controller: horizon N must be at least 1");
  d.N = N;
  d.Ts = Ts;
  d.det = parts.model.system();
  d.n_x = d.det.n_x();
  d.n_u = d.det.n_u();
  d.n_z = d.det.n_z();
  d.filter = parts.filter;
  d.R_ww = parts.R_ww;
  d.R_vv = R_vv;
  if (limits.u_min.size() != d.n_u || limits.du_min.size() != d.n_u || limits.z_min.size() != d.n_z) {
    throw std::invalid_argument("controller: limits have wrong dimensions");
  }
  limits.validate();
  d.limits = limits;
  d.condensing = Condensing(d.det.A, d.det.B, N);
  d.output_maps.clear();
  for (std::size_t j = 0; j <= N; ++j) {
    Matrix Z = d.det.C * d.condensing.gamma(j);
    const Index col = static_cast<Index>(std::min(j, N - 1)) * d.n_u;
    Z.middleCols(col, d.n_u) += d.det.D;
    d.output_maps.push_back(std::move(Z));
  }
  d.soft = limits.has_output_bounds();
  d.n_decision = static_cast<Index>(N) * d.n_u + (d.soft ? 2 * static_cast<Index>(N) * d.n_z : 0);
}

void build_constraint_matrix(ControllerDesign& d) {
  const Index nu = d.n_u;
  const Index nz = d.n_z;
  const Index N = static_cast<Index>(d.N);
  const bool rate = d.limits.has_rate_bounds();
  const Index rows = N * nu + (rate ? N * nu : 0) + (d.soft ? 4 * N * nz : 0);
  Matrix A = Matrix::Zero(rows, d.n_decision);
  Index r = 0;
  for (Index i = 0; i < N * nu; ++i) A(r++, i) = 1.0;
  if (rate) {
    for (Index k = 0; k < N; ++k) {
      for (Index j = 0; j < nu; ++j) {
        A(r, k * nu + j) = 1.0;
        if (k > 0) A(r, (k - 1) * nu + j) = -1.0;
        ++r;
      }
    }
  }
  if (d.soft) {
    for (Index j = 1; j <= N; ++j) {
      const Matrix& Z = d.output_maps[static_cast<std::size_t>(j)];
      A.block(r, 0, nz, N * nu) = Z;
      A.block(r, d.xi_offset() + (j - 1) * nz, nz, nz).setIdentity();
      r += nz;
      A.block(r, 0, nz, N * nu) = Z;
      A.block(r, d.eta_offset() + (j - 1) * nz, nz, nz) = -Matrix::Identity(nz, nz);
      r += nz;
    }
    for (Index i = 0; i < 2 * N * nz; ++i) A(r++, d.xi_offset() + i) = 1.0;
  }
  d.constraint_matrix = std::move(A);
}

void finish_hessian(ControllerDesign& d, const Matrix& H_u, const QuadraticTerm& soft) {
  const Index n_u_dec = static_cast<Index>(d.N) * d.n_u;
  d.H = Matrix::Zero(d.n_decision, d.n_decision);
  d.H.topLeftCorner(n_u_dec, n_u_dec) = H_u;
  d.g_soft = Vector::Zero(d.n_decision - n_u_dec);
  if (d.soft) {
    d.H.bottomRightCorner(soft.H.rows(), soft.H.cols()) = soft.H;
    d.g_soft = soft.g;
  }
  d.H = symmetrized(d.H);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(d.H, Eigen::EigenvaluesOnly);
  d.hessian_min_eigenvalue = d.H.size() == 0 ? 0.0 : eig.eigenvalues()(0);
  const double scale = std::max(1.0, d.H.cwiseAbs().maxCoeff());
  if (d.hessian_min_eigenvalue < -1e-9 * scale) {
    throw std::invalid_argument("controller: Hessian is not positive semidefinite (min eigenvalue " +
                                std::to_string(d.hessian_min_eigenvalue) + ")");
  }
  build_constraint_matrix(d);
}

}  // namespace

ControllerDesign design_ct_lmpc(const NsRealization& model, const ContinuousWeights& weights,
                                const ControlLimits& limits, std::size_t N, double Ts, const Matrix& R_vv) {
  CommonParts parts = common_parts(model, Ts, R_vv);
  ControllerDesign d;
  d.kind = ControllerKind::Continuous;
  init_shape(d, parts, limits, N, Ts, R_vv);
  d.cost = discretize_cost(parts.model, weights);
  d.dt_weights = weights;

  const Matrix H_track = tracking_hessian(d.condensing, d.cost.tracking.Q, d.n_u);
  const QuadraticTerm rom = build_rom_eco_block(N, d.cost.Q_du, d.cost.q_eco, Vector::Zero(d.n_u));
  const QuadraticTerm soft = build_soft_block(d.cost.Q_xi, d.cost.Q_eta, d.cost.q_xi, d.cost.q_eta, N);
  finish_hessian(d, H_track + rom.H, soft);
  return d;
}

ControllerDesign build_dt_baseline(const NsRealization& model, const ContinuousWeights& weights,
                                   const ControlLimits& limits, std::size_t N, double Ts, const Matrix& R_vv) {
  CommonParts parts = common_parts(model, Ts, R_vv);
  ControllerDesign d;
  d.kind = ControllerKind::Discrete;
  init_shape(d, parts, limits, N, Ts, R_vv);
  d.dt_weights = weights;

  const Index n = static_cast<Index>(N) * d.n_u;
  Matrix H = Matrix::Zero(n, n);
  for (std::size_t j = 1; j <= N; ++j) {
    const Matrix& Z = d.output_maps[j];
    H.noalias() += 2.0 * Z.transpose() * weights.Q_cz * Z;
  }
  for (std::size_t k = 0; k < N; ++k) {
    const Index i = static_cast<Index>(k) * d.n_u;
    H.block(i, i, d.n_u, d.n_u) += 2.0 * weights.Q_cu;
  }
  const QuadraticTerm rom = build_rom_eco_block(N, 2.0 * weights.Q_cdu, weights.q_ceco, Vector::Zero(d.n_u));
  const QuadraticTerm soft = build_soft_block(weights.Q_cxi, weights.Q_ceta, weights.q_cxi, weights.q_ceta, N);
  finish_hessian(d, H + rom.H, soft);
  return d;
}

ControllerState initial_state(const ControllerDesign& design, const Vector& u_prev) {
  if (u_prev.size() != design.n_u) throw std::invalid_argument("initial_state: u_prev has wrong dimension");
  ControllerState s;
  s.xd = Vector::Zero(design.n_x);
  s.filter = initial_filter_state(design.filter);
  s.u_prev = u_prev;
  return s;
}

namespace {

struct Gradient {
  Vector g;
  double constant = 0.0;
};

Gradient ct_gradient(const ControllerDesign& d, const ControllerState& st, const std::vector<Vector>& r,
                     const std::vector<Vector>& ubar) {
  const std::size_t N = d.N;
  const Index nx = d.n_x;
  const TrackingCost& tc = d.cost.tracking;
  std::vector<Vector> q(N);
  Gradient out;
  for (std::size_t k = 0; k < N; ++k) {
    Vector rk(d.n_z + d.n_u);
    rk << r[k], ubar[k];
    q[k] = tc.M * rk;
    const Vector b = d.condensing.power(k) * st.xd;
    out.constant += 0.5 * b.dot(tc.Q.topLeftCorner(nx, nx) * b) + q[k].head(nx).dot(b) + d.cost.rho(r[k], ubar[k]);
  }
  const QuadraticTerm rom = build_rom_eco_block(N, d.cost.Q_du, d.cost.q_eco, st.u_prev);
  out.g = tracking_gradient(d.condensing, tc.Q, q, st.xd, d.n_u) + rom.g;
  out.constant += 0.5 * st.u_prev.dot(d.cost.Q_du * st.u_prev);
  return out;
}

Gradient dt_gradient(const ControllerDesign& d, const ControllerState& st, const std::vector<Vector>& r,
                     const std::vector<Vector>& ubar) {
  const std::size_t N = d.N;
  const ContinuousWeights& w = d.dt_weights;
  Gradient out;
  out.g = Vector::Zero(static_cast<Index>(N) * d.n_u);
  for (std::size_t j = 1; j <= N; ++j) {
    const Vector e = d.det.C * (d.condensing.power(j) * st.xd) - r[j];
    out.g.noalias() += 2.0 * d.output_maps[j].transpose() * (w.Q_cz * e);
    out.constant += e.dot(w.Q_cz * e);
  }
  for (std::size_t k = 0; k < N; ++k) {
    out.g.segment(static_cast<Index>(k) * d.n_u, d.n_u) -= 2.0 * w.Q_cu * ubar[k];
    out.constant += ubar[k].dot(w.Q_cu * ubar[k]);
  }
  const QuadraticTerm rom = build_rom_eco_block(N, 2.0 * w.Q_cdu, w.q_ceco, st.u_prev);
  out.g += rom.g;
  out.constant += st.u_prev.dot(w.Q_cdu * st.u_prev);
  return out;
}

Gradient objective_gradient(const ControllerDesign& d, const ControllerState& st, const StepInputs& in,
                            const std::vector<Vector>& zs) {
  std::vector<Vector> r(d.N + 1);
  for (std::size_t j = 0; j <= d.N; ++j) r[j] = hold_at(in.z_ref, j, d.n_z) - zs[j];
  std::vector<Vector> ubar(d.N);
  for (std::size_t k = 0; k < d.N; ++k) ubar[k] = hold_at(in.u_ref, k, d.n_u);
  Gradient grad = d.kind == ControllerKind::Continuous ? ct_gradient(d, st, r, ubar) : dt_gradient(d, st, r, ubar);
  Vector g(d.n_decision);
  g << grad.g, d.g_soft;
  grad.g = std::move(g);
  return grad;
}

std::vector<Vector> stochastic_predictions(const ControllerDesign& d, const FilterState& filter) {
  std::vector<Vector> zs;
  zs.reserve(d.N + 1);
  zs.push_back(d.filter.C * filter.xs);
  for (Vector& v : predict_outputs(d.filter, filter, d.N)) zs.push_back(std::move(v));
  return zs;
}

Vector shifted(const ControllerDesign& d, const Vector& w) {
  Vector out = w;
  auto shift = [&](Index offset, Index block, Index count) {
    for (Index k = 0; k + 1 < count; ++k) out.segment(offset + k * block, block) = w.segment(offset + (k + 1) * block, block);
  };
  const Index N = static_cast<Index>(d.N);
  shift(0, d.n_u, N);
  if (d.soft) {
    shift(d.xi_offset(), d.n_z, N);
    shift(d.eta_offset(), d.n_z, N);
  }
  return out;
}

}  // namespace

QpProblem assemble_qp(const ControllerDesign& d, const ControllerState& st, const StepInputs& in,
                      const std::vector<Vector>& zs) {
  QpProblem p;
  p.H = d.H;
  p.g = objective_gradient(d, st, in, zs).g;
  p.A = d.constraint_matrix;
  p.lower = Vector::Constant(p.A.rows(), -kInf);
  p.upper = Vector::Constant(p.A.rows(), kInf);
  const Index nu = d.n_u;
  const Index nz = d.n_z;
  const Index N = static_cast<Index>(d.N);
  const ControlLimits& L = d.limits;
  Index r = 0;
  for (Index k = 0; k < N; ++k, r += nu) {
    p.lower.segment(r, nu) = L.u_min;
    p.upper.segment(r, nu) = L.u_max;
  }
  if (L.has_rate_bounds()) {
    for (Index k = 0; k < N; ++k, r += nu) {
      p.lower.segment(r, nu) = L.du_min;
      p.upper.segment(r, nu) = L.du_max;
      if (k == 0) {
        p.lower.segment(r, nu) += st.u_prev;
        p.upper.segment(r, nu) += st.u_prev;
      }
    }
  }
  if (d.soft) {
    for (Index j = 1; j <= N; ++j) {
      const Vector offset = d.det.C * (d.condensing.power(static_cast<std::size_t>(j)) * st.xd) +
                            zs[static_cast<std::size_t>(j)];
      p.lower.segment(r, nz) = L.z_min - offset;
      r += nz;
      p.upper.segment(r, nz) = L.z_max - offset;
      r += nz;
    }
    p.lower.segment(r, 2 * N * nz).setZero();
    r += 2 * N * nz;
  }
  return p;
}

StepResult step(const ControllerDesign& d, ControllerState& st, const StepInputs& in) {
  if (in.y.size() != d.n_z) throw std::invalid_argument("controller step: measurement has wrong dimension");
  const Vector zd = d.det.C * st.xd + d.det.D * st.u_prev;

  StepResult res;
  res.innovation = innovation(d.filter, st.filter, in.y, zd);
  FilterState filter = filter_update(d.filter, st.filter, in.y, zd);
  res.zs_pred = stochastic_predictions(d, filter);

  ControllerState probe = st;
  probe.filter = filter;
  const Gradient grad = objective_gradient(d, probe, in, res.zs_pred);
  QpProblem qp = assemble_qp(d, probe, in, res.zs_pred);

  QpOptions opts;
  opts.check_convexity = false;
  res.qp = solve(qp, st.warm_start, opts);
  if (!res.qp.ok()) {
    throw QpFailure("controller step: QP " + std::string(to_string(res.qp.status)) + ": " + res.qp.summary(),
                    res.qp);
  }
  res.u = res.qp.w.head(d.n_u);
  if (d.soft) {
    res.xi = res.qp.w.segment(d.xi_offset(), d.n_z);
    res.eta = res.qp.w.segment(d.eta_offset(), d.n_z);
  }
  res.objective = res.qp.objective + grad.constant;

  st.filter = std::move(filter);
  st.xd = d.det.A * st.xd + d.det.B * res.u;
  st.u_prev = res.u;
  st.warm_start = shifted(d, res.qp.w);
  return res;
}

Controller::Controller(std::shared_ptr<const ControllerDesign> design, const Vector& u_prev)
    : design_(std::move(design)), state_(initial_state(*design_, u_prev)) {}

}  // namespace ctlmpc
