#include "ctlmpc/discretization.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctlmpc {

Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
  if (a.size() == 0) return a;
  return a.exp();
}

DelaySplit split_delay(double delay, double Ts) {
  if (!(Ts > 0.0)) throw std::invalid_argument("split_delay: Ts must be positive");
  if (!(delay >= 0.0) || !std::isfinite(delay)) throw std::invalid_argument("split_delay: invalid delay");
  double ratio = delay / Ts;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-12 * std::max(1.0, nearest)) ratio = nearest;
  DelaySplit split;
  split.whole_steps = static_cast<Index>(std::ceil(ratio));
  split.fraction = static_cast<double>(split.whole_steps) - ratio;
  return split;
}

namespace {

struct PhiGamma {
  Matrix phi;
  Matrix gamma;
};

// e^{A h} and int_0^h e^{A s} ds B.
PhiGamma phi_gamma(const Matrix& A, const Matrix& B, double h) {
  const Index n = A.rows();
  const Index p = B.cols();
  Matrix aug = Matrix::Zero(n + p, n + p);
  aug.topLeftCorner(n, n) = A * h;
  aug.topRightCorner(n, p) = B * h;
  const Matrix e = expm(aug);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, p)};
}

// Number of halvings so that the sub-interval generator has 1-norm <= 1/2.
int halvings(const Matrix& generator, double h) {
  const double norm = generator.cwiseAbs().colwise().sum().maxCoeff() * h;
  if (!(norm > 0.5)) return 0;
  return static_cast<int>(std::ceil(std::log2(norm / 0.5)));
}

// int_0^h e^{F' s} W e^{F s} ds together with e^{F h}. The block exponential
// is applied on h / 2^k and the result doubled, which keeps e^{-F' h} bounded.
struct GramianStep {
  Matrix integral;
  Matrix transition;
};

GramianStep quadratic_integral(const Matrix& F, const Matrix& W, double h) {
  const Index n = F.rows();
  const int k = halvings(F, h);
  const double h0 = std::ldexp(h, -k);
  Matrix big = Matrix::Zero(2 * n, 2 * n);
  big.topLeftCorner(n, n) = -F.transpose() * h0;
  big.topRightCorner(n, n) = W * h0;
  big.bottomRightCorner(n, n) = F * h0;
  const Matrix e = expm(big);
  Matrix phi = e.bottomRightCorner(n, n);
  Matrix integral = symmetrized(phi.transpose() * e.topRightCorner(n, n));
  for (int i = 0; i < k; ++i) {
    integral = symmetrized(integral + phi.transpose() * integral * phi);
    phi = (phi * phi).eval();
  }
  return {integral, phi};
}

void project_psd(Matrix& m, double tol) {
  if (m.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() >= 0.0) return;
  if (eig.eigenvalues().minCoeff() < -tol * scale) return;
  const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
  m = symmetrized(eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose());
}

}  // namespace

void require_psd(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + " must be square");
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument(std::string(what) + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(m), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw std::invalid_argument(std::string(what) + " is indefinite (smallest eigenvalue " +
                                std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
}

DiscreteLti zoh_discretize(const DelayedSisoSS& ss, double Ts) {
  const Index n = ss.order();
  const DelaySplit split = split_delay(ss.delay, Ts);
  const Index m = split.whole_steps;
  const Index nx = n + m;

  DiscreteLti d;
  d.Ts = Ts;
  d.A = Matrix::Zero(nx, nx);
  d.B = Matrix::Zero(nx, 1);
  d.C = Matrix::Zero(1, nx);
  d.D = Matrix::Zero(1, 1);

  if (m == 0) {
    const PhiGamma full = phi_gamma(ss.A, ss.B, Ts);
    d.A.topLeftCorner(n, n) = full.phi;
    d.B.topRows(n) = full.gamma;
    d.C.leftCols(n) = ss.C;
    d.D = ss.D;
    return d;
  }

  // Over [0, (1 - theta) Ts) the channel sees u_{k-m}, afterwards u_{k-m+1}.
  const double theta = split.fraction;
  const PhiGamma early = phi_gamma(ss.A, ss.B, (1.0 - theta) * Ts);
  const PhiGamma late = phi_gamma(ss.A, ss.B, theta * Ts);
  d.A.topLeftCorner(n, n) = late.phi * early.phi;
  d.A.block(0, n, n, 1) = late.phi * early.gamma;
  if (m >= 2) {
    d.A.block(0, n + 1, n, 1) = late.gamma;
  } else {
    d.B.topRows(n) = late.gamma;
  }
  for (Index i = 0; i + 1 < m; ++i) d.A(n + i, n + i + 1) = 1.0;
  d.B(n + m - 1, 0) = 1.0;
  d.C.leftCols(n) = ss.C;
  d.C(0, n) = ss.D(0, 0);
  return d;
}

DelayedBlock as_block(const DelayedSisoSS& ss) {
  return DelayedBlock{ss.A, ss.B, ss.C, ss.D, ss.delay, {static_cast<Index>(ss.input)},
                      {static_cast<Index>(ss.output)}};
}

SampledModel::SampledModel(std::vector<DelayedBlock> blocks, Index n_out, Index n_in, double Ts)
    : blocks_(std::move(blocks)), n_out_(n_out), n_in_(n_in), Ts_(Ts) {
  if (!(Ts > 0.0)) throw std::invalid_argument("SampledModel: Ts must be positive");

  Index nx = 0;
  layout_.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    const auto p = static_cast<Index>(b.inputs.size());
    const auto q = static_cast<Index>(b.outputs.size());
    if (b.B.cols() != p || b.C.rows() != q || b.D.rows() != q || b.D.cols() != p || b.A.rows() != b.B.rows() ||
        b.C.cols() != b.A.rows()) {
      throw std::invalid_argument("SampledModel: inconsistent block dimensions");
    }
    for (Index j : b.inputs) {
      if (j < 0 || j >= n_in) throw std::invalid_argument("SampledModel: input index out of range");
    }
    for (Index i : b.outputs) {
      if (i < 0 || i >= n_out) throw std::invalid_argument("SampledModel: output index out of range");
    }
    Layout l;
    l.state_offset = nx;
    l.order = b.A.rows();
    l.buffer_offset = nx + l.order;
    l.split = split_delay(b.delay, Ts);
    layout_.push_back(l);
    nx += l.order + l.split.whole_steps * p;
  }

  system_.Ts = Ts;
  system_.A = Matrix::Zero(nx, nx);
  system_.B = Matrix::Zero(nx, n_in);
  system_.C = Matrix::Zero(n_out, nx);
  system_.D = Matrix::Zero(n_out, n_in);

  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const DelayedBlock& b = blocks_[k];
    const Layout& l = layout_[k];
    const Index n = l.order;
    const auto p = static_cast<Index>(b.inputs.size());
    const Index m = l.split.whole_steps;
    const Index x0 = l.state_offset;
    const Index h0 = l.buffer_offset;

    Matrix phi;
    Matrix gamma_old;  // acts on the oldest held input (or u_k when m = 0)
    Matrix gamma_new;
    if (m == 0) {
      const PhiGamma full = phi_gamma(b.A, b.B, Ts);
      phi = full.phi;
      gamma_old = full.gamma;
    } else {
      const double theta = l.split.fraction;
      const PhiGamma early = phi_gamma(b.A, b.B, (1.0 - theta) * Ts);
      const PhiGamma late = phi_gamma(b.A, b.B, theta * Ts);
      phi = late.phi * early.phi;
      gamma_old = late.phi * early.gamma;
      gamma_new = late.gamma;
    }
    system_.A.block(x0, x0, n, n) = phi;

    auto add_input_map = [&](const Matrix& gain, Index rows_at, Index slot_or_neg, Matrix& target_a,
                             Matrix& target_b) {
      for (Index c = 0; c < p; ++c) {
        if (slot_or_neg >= 0) {
          target_a.block(rows_at, slot_or_neg + c, gain.rows(), 1) += gain.col(c);
        } else {
          target_b.block(rows_at, b.inputs[static_cast<std::size_t>(c)], gain.rows(), 1) += gain.col(c);
        }
      }
    };

    if (m == 0) {
      add_input_map(gamma_old, x0, -1, system_.A, system_.B);
    } else {
      add_input_map(gamma_old, x0, h0, system_.A, system_.B);
      add_input_map(gamma_new, x0, m >= 2 ? h0 + p : -1, system_.A, system_.B);
      for (Index i = 0; i + 1 < m; ++i) {
        system_.A.block(h0 + i * p, h0 + (i + 1) * p, p, p) = Matrix::Identity(p, p);
      }
      for (Index c = 0; c < p; ++c) system_.B(h0 + (m - 1) * p + c, b.inputs[static_cast<std::size_t>(c)]) = 1.0;
    }

    for (std::size_t r = 0; r < b.outputs.size(); ++r) {
      const Index row = b.outputs[r];
      system_.C.block(row, x0, 1, n) += b.C.row(static_cast<Index>(r));
      for (Index c = 0; c < p; ++c) {
        const double dval = b.D(static_cast<Index>(r), c);
        if (m == 0) {
          system_.D(row, b.inputs[static_cast<std::size_t>(c)]) += dval;
        } else {
          system_.C(row, h0 + c) += dval;
        }
      }
    }
  }
}

SampledModel SampledModel::from_channels(const std::vector<DelayedSisoSS>& channels, Index n_out, Index n_in,
                                         double Ts) {
  std::vector<DelayedBlock> blocks;
  blocks.reserve(channels.size());
  for (const auto& ch : channels) blocks.push_back(as_block(ch));
  return SampledModel(std::move(blocks), n_out, n_in, Ts);
}

std::vector<double> SampledModel::switch_times() const {
  std::vector<double> times;
  for (const auto& l : layout_) {
    if (l.split.whole_steps >= 1 && l.split.fraction > 0.0) times.push_back((1.0 - l.split.fraction) * Ts_);
  }
  std::sort(times.begin(), times.end());
  std::vector<double> unique;
  for (double t : times) {
    if (unique.empty() || t - unique.back() > 1e-12 * Ts_) unique.push_back(t);
  }
  return unique;
}

Index SampledModel::source_column(std::size_t b, double t) const {
  // Column of the first input of block b; remaining inputs follow per layout.
  const Layout& l = layout_[b];
  const Index m = l.split.whole_steps;
  if (m == 0) return -1;
  const double switch_at = (1.0 - l.split.fraction) * Ts_;
  if (t < switch_at) return l.buffer_offset;
  if (m == 1) return -1;
  return l.buffer_offset + static_cast<Index>(blocks_[b].inputs.size());
}

TrackingCost SampledModel::tracking_cost(const Matrix& Qc) const {
  const Index nx = n_x();
  const Index nu = n_in_;
  const Index nz = n_out_;
  const Index nr = nz + nu;
  if (Qc.rows() != nr || Qc.cols() != nr) {
    throw std::invalid_argument("tracking_cost: weight must be (n_z + n_u) square");
  }
  require_psd(Qc, "tracking weight");

  // Extended state [x_aug; u_k; zbar_k; ubar_k]; everything but the channel
  // states is constant over the interval.
  const Index ne = nx + nu + nr;
  const Index u0 = nx;
  const Index r0 = nx + nu;

  std::vector<double> edges{0.0};
  for (double t : switch_times()) edges.push_back(t);
  edges.push_back(Ts_);

  Matrix quad = Matrix::Zero(ne, ne);
  Matrix psi = Matrix::Identity(ne, ne);
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double h = edges[s + 1] - edges[s];
    if (h <= 0.0) continue;
    const double mid = 0.5 * (edges[s] + edges[s + 1]);

    Matrix F = Matrix::Zero(ne, ne);
    Matrix L = Matrix::Zero(nr, ne);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const DelayedBlock& blk = blocks_[b];
      const Layout& l = layout_[b];
      const Index src = source_column(b, mid);
      F.block(l.state_offset, l.state_offset, l.order, l.order) = blk.A;
      for (std::size_t c = 0; c < blk.inputs.size(); ++c) {
        const Index col = src >= 0 ? src + static_cast<Index>(c) : u0 + blk.inputs[c];
        F.block(l.state_offset, col, l.order, 1) += blk.B.col(static_cast<Index>(c));
        for (std::size_t r = 0; r < blk.outputs.size(); ++r) {
          L(blk.outputs[r], col) += blk.D(static_cast<Index>(r), static_cast<Index>(c));
        }
      }
      for (std::size_t r = 0; r < blk.outputs.size(); ++r) {
        L.block(blk.outputs[r], l.state_offset, 1, l.order) += blk.C.row(static_cast<Index>(r));
      }
    }
    for (Index i = 0; i < nz; ++i) L(i, r0 + i) = -1.0;
    for (Index j = 0; j < nu; ++j) {
      L(nz + j, u0 + j) = 1.0;
      L(nz + j, r0 + nz + j) = -1.0;
    }

    const GramianStep step = quadratic_integral(F, L.transpose() * Qc * L, h);
    quad += psi.transpose() * step.integral * psi;
    psi = (step.transition * psi).eval();
  }
  quad = symmetrized(quad);

  TrackingCost cost;
  cost.Q = quad.topLeftCorner(nx + nu, nx + nu);
  project_psd(cost.Q, 1e-10);
  cost.M = quad.topRightCorner(nx + nu, nr);
  cost.R = quad.bottomRightCorner(nr, nr);
  return cost;
}

TrackingCost discretize_tracking_cost(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D,
                                      const Matrix& Qc, double Ts) {
  DelayedBlock block{A, B, C, D, 0.0, {}, {}};
  for (Index j = 0; j < B.cols(); ++j) block.inputs.push_back(j);
  for (Index i = 0; i < C.rows(); ++i) block.outputs.push_back(i);
  return SampledModel({block}, C.rows(), B.cols(), Ts).tracking_cost(Qc);
}

Matrix process_noise_cov(const Matrix& A, const Matrix& B, double Ts) {
  if (!(Ts > 0.0)) throw std::invalid_argument("process_noise_cov: Ts must be positive");
  const Index n = A.rows();
  if (n == 0) return Matrix(0, 0);
  const int k = halvings(A, Ts);
  const double h0 = std::ldexp(Ts, -k);
  Matrix big = Matrix::Zero(2 * n, 2 * n);
  big.topLeftCorner(n, n) = -A * h0;
  big.topRightCorner(n, n) = B * B.transpose() * h0;
  big.bottomRightCorner(n, n) = A.transpose() * h0;
  const Matrix e = expm(big);
  Matrix cov = symmetrized(e.bottomRightCorner(n, n).transpose() * e.topRightCorner(n, n));
  Matrix phi = e.bottomRightCorner(n, n).transpose();  // e^{A h0}
  for (int i = 0; i < k; ++i) {
    cov = symmetrized(cov + phi * cov * phi.transpose());
    phi = (phi * phi).eval();
  }
  return cov;
}

double rho(const Vector& zbar, const Vector& ubar, const Matrix& Qc, double Ts) {
  Vector r(zbar.size() + ubar.size());
  r << zbar, ubar;
  if (Qc.rows() != r.size()) throw std::invalid_argument("rho: dimension mismatch");
  return 0.5 * r.dot(Qc * r) * Ts;
}

ContinuousWeights ContinuousWeights::zeros(Index n_z, Index n_u) {
  return ContinuousWeights{Matrix::Zero(n_z, n_z), Matrix::Zero(n_u, n_u), Matrix::Zero(n_u, n_u),
                           Vector::Zero(n_u),      Matrix::Zero(n_z, n_z), Matrix::Zero(n_z, n_z),
                           Vector::Zero(n_z),      Vector::Zero(n_z)};
}

ContinuousWeights ContinuousWeights::in_seconds(double seconds_per_unit) const {
  // int f dt_unit = (1/unit) int f dt_s, and du/dt_unit = unit du/dt_s.
  const double inv = 1.0 / seconds_per_unit;
  ContinuousWeights w = *this;
  w.Q_cz *= inv;
  w.Q_cu *= inv;
  w.q_ceco *= inv;
  w.Q_cxi *= inv;
  w.Q_ceta *= inv;
  w.q_cxi *= inv;
  w.q_ceta *= inv;
  w.Q_cdu *= seconds_per_unit;
  return w;
}

Matrix ContinuousWeights::tracking_weight() const {
  const Index nz = Q_cz.rows();
  const Index nu = Q_cu.rows();
  Matrix q = Matrix::Zero(nz + nu, nz + nu);
  q.topLeftCorner(nz, nz) = Q_cz;
  q.bottomRightCorner(nu, nu) = Q_cu;
  return q;
}

namespace {
bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}
}  // namespace

bool ContinuousWeights::operator==(const ContinuousWeights& o) const {
  return same(Q_cz, o.Q_cz) && same(Q_cu, o.Q_cu) && same(Q_cdu, o.Q_cdu) && same(q_ceco, o.q_ceco) &&
         same(Q_cxi, o.Q_cxi) && same(Q_ceta, o.Q_ceta) && same(q_cxi, o.q_cxi) && same(q_ceta, o.q_ceta);
}

double DiscreteCost::rho(const Vector& zbar, const Vector& ubar) const {
  return ctlmpc::rho(zbar, ubar, tracking_weight, Ts);
}

DiscreteCost discretize_cost(const SampledModel& model, const ContinuousWeights& w) {
  const double Ts = model.Ts();
  DiscreteCost c;
  c.Ts = Ts;
  c.tracking_weight = w.tracking_weight();
  c.tracking = model.tracking_cost(c.tracking_weight);
  require_psd(w.Q_cdu, "Q_cdu");
  c.Q_du = w.Q_cdu / Ts;
  const Index nu = c.Q_du.rows();
  c.Q_du_bar.resize(2 * nu, 2 * nu);
  c.Q_du_bar << c.Q_du, -c.Q_du, -c.Q_du, c.Q_du;
  c.q_eco = w.q_ceco * Ts;
  c.Q_xi = w.Q_cxi * Ts;
  c.Q_eta = w.Q_ceta * Ts;
  c.q_xi = w.q_cxi * Ts;
  c.q_eta = w.q_ceta * Ts;
  return c;
}

}  // namespace ctlmpc
