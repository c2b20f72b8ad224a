#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctlmpc::testing {

Matrix simpson(const std::function<Matrix(double)>& f, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  Matrix acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * (h / 3.0);
}

Matrix trapezoid(const std::function<Matrix(double)>& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  Matrix acc = 0.5 * (f(a) + f(b));
  for (int i = 1; i < panels; ++i) acc += f(a + i * h);
  return acc * h;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Vector random_vector(Rng& rng, Index n, double scale) { return random_matrix(rng, n, 1, scale); }

Matrix random_stable(Rng& rng, Index n, double min_rate, double max_rate) {
  // real block-diagonal spectrum in a random basis
  Matrix D = Matrix::Zero(n, n);
  Index i = 0;
  while (i < n) {
    const double re = -uniform(rng, min_rate, max_rate);
    if (i + 1 < n && uniform(rng, 0.0, 1.0) < 0.4) {
      const double im = uniform(rng, 0.1, 1.5);
      D(i, i) = re;
      D(i + 1, i + 1) = re;
      D(i, i + 1) = im;
      D(i + 1, i) = -im;
      i += 2;
    } else {
      D(i, i) = re;
      ++i;
    }
  }
  Matrix T = random_matrix(rng, n, n) + 2.0 * Matrix::Identity(n, n);
  while (std::abs(T.determinant()) < 0.2) T = random_matrix(rng, n, n) + 2.0 * Matrix::Identity(n, n);
  return T * D * T.inverse();
}

Matrix random_psd(Rng& rng, Index n, Index rank) {
  if (rank < 0) rank = n;
  const Matrix W = random_matrix(rng, rank, n);
  return W.transpose() * W;
}

Matrix random_pd(Rng& rng, Index n, double floor) { return random_psd(rng, n) + floor * Matrix::Identity(n, n); }

DelayedSisoSS random_channel(Rng& rng, Index order, double max_delay, std::size_t out, std::size_t in,
                             bool feedthrough) {
  DelayedSisoSS c;
  c.A = random_stable(rng, order, 0.1, 1.5);
  c.B = random_matrix(rng, order, 1);
  c.C = random_matrix(rng, 1, order);
  c.D = feedthrough ? random_matrix(rng, 1, 1) : Matrix::Zero(1, 1);
  c.delay = max_delay > 0.0 ? uniform(rng, 0.0, max_delay) : 0.0;
  c.output = out;
  c.input = in;
  return c;
}

FineGridSimulator::FineGridSimulator(std::vector<DelayedSisoSS> channels, Index n_out, Index n_in)
    : channels_(std::move(channels)), n_out_(n_out), n_in_(n_in) {}

void FineGridSimulator::integrate(
    const std::vector<Vector>& u, double Ts, int substeps,
    const std::function<void(double, double, const std::vector<Vector>&, std::size_t)>& segment,
    std::vector<Vector>* samples) const {
  const std::size_t K = u.size();
  const double T = static_cast<double>(K) * Ts;
  std::vector<double> breaks;
  for (std::size_t k = 0; k <= K; ++k) breaks.push_back(static_cast<double>(k) * Ts);
  for (const auto& c : channels_) {
    for (std::size_t k = 0; k <= K; ++k) {
      const double t = static_cast<double>(k) * Ts + c.delay;
      if (t < T) breaks.push_back(t);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(), [](double a, double b) { return std::abs(a - b) < 1e-13; }),
               breaks.end());

  std::vector<Vector> x;
  for (const auto& c : channels_) x.push_back(Vector::Zero(c.order()));

  auto input_at = [&](const DelayedSisoSS& c, double t) {
    const double s = t - c.delay;
    if (s < 0.0) return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(s / Ts + 1e-12));
    return k < K ? u[k](static_cast<Index>(c.input)) : 0.0;
  };
  auto output = [&](const std::vector<Vector>& xs, double t_mid) {
    Vector z = Vector::Zero(n_out_);
    for (std::size_t i = 0; i < channels_.size(); ++i) {
      const auto& c = channels_[i];
      z(static_cast<Index>(c.output)) += (c.C * xs[i])(0) + c.D(0, 0) * input_at(c, t_mid);
    }
    return z;
  };

  if (samples) samples->push_back(output(x, 0.0 + 1e-9 * Ts));
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s];
    const double b = breaks[s + 1];
    const double mid = 0.5 * (a + b);
    std::vector<double> held;
    for (const auto& c : channels_) held.push_back(input_at(c, mid));
    const int n = 2 * std::max(1, static_cast<int>(std::ceil(substeps * (b - a) / Ts)));
    const double h = (b - a) / n;
    std::vector<Vector> nodes;
    nodes.reserve(static_cast<std::size_t>(n) + 1);
    nodes.push_back(output(x, mid));
    for (int j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < channels_.size(); ++i) {
        const auto& c = channels_[i];
        const Vector bu = c.B.col(0) * held[i];
        auto f = [&](const Vector& v) -> Vector { return c.A * v + bu; };
        const Vector k1 = f(x[i]);
        const Vector k2 = f(x[i] + 0.5 * h * k1);
        const Vector k3 = f(x[i] + 0.5 * h * k2);
        const Vector k4 = f(x[i] + h * k3);
        x[i] += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      nodes.push_back(output(x, mid));
    }
    const auto k = static_cast<std::size_t>(std::floor(mid / Ts));
    if (segment) segment(a, b, nodes, k);
    if (samples) {
      const double next = static_cast<double>(samples->size()) * Ts;
      if (std::abs(b - next) < 1e-12 * std::max(1.0, next)) samples->push_back(output(x, b + 1e-9 * Ts));
    }
  }
}

std::vector<Vector> FineGridSimulator::sampled_outputs(const std::vector<Vector>& u, double Ts, int substeps) const {
  std::vector<Vector> samples;
  integrate(u, Ts, substeps, nullptr, &samples);
  return samples;
}

double FineGridSimulator::tracking_cost(const std::vector<Vector>& u, double Ts, const Matrix& Qc,
                                        const std::vector<Vector>& zbar, const std::vector<Vector>& ubar,
                                        int substeps) const {
  double total = 0.0;
  integrate(
      u, Ts, substeps,
      [&](double a, double b, const std::vector<Vector>& z, std::size_t k) {
        const std::size_t n = z.size() - 1;
        const double h = (b - a) / static_cast<double>(n);
        Vector e(n_out_ + n_in_);
        double acc = 0.0;
        for (std::size_t j = 0; j <= n; ++j) {
          e << z[j] - zbar[k], u[k] - ubar[k];
          const double w = (j == 0 || j == n) ? 1.0 : (j % 2 ? 4.0 : 2.0);
          acc += w * 0.5 * e.dot(Qc * e);
        }
        total += acc * h / 3.0;
      },
      nullptr);
  return total;
}

Vector enumerate_box_qp(const Matrix& H, const Vector& g, const Vector& lo, const Vector& hi) {
  const Index n = H.rows();
  std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 free, 1 lower, 2 upper
  Vector best;
  double best_obj = std::numeric_limits<double>::infinity();
  const double tol = 1e-9;
  while (true) {
    Vector w = Vector::Zero(n);
    std::vector<Index> free;
    bool valid = true;
    for (Index i = 0; i < n; ++i) {
      const int s = state[static_cast<std::size_t>(i)];
      if (s == 0) {
        free.push_back(i);
      } else {
        const double b = s == 1 ? lo(i) : hi(i);
        if (!std::isfinite(b)) valid = false;
        w(i) = b;
      }
    }
    if (valid) {
      const auto nf = static_cast<Index>(free.size());
      if (nf > 0) {
        Matrix Hff(nf, nf);
        Vector rhs(nf);
        for (Index a = 0; a < nf; ++a) {
          rhs(a) = -g(free[static_cast<std::size_t>(a)]);
          for (Index i = 0; i < n; ++i) {
            if (state[static_cast<std::size_t>(i)] != 0) rhs(a) -= H(free[static_cast<std::size_t>(a)], i) * w(i);
          }
          for (Index c = 0; c < nf; ++c) Hff(a, c) = H(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(c)]);
        }
        const Vector wf = Hff.ldlt().solve(rhs);
        for (Index a = 0; a < nf; ++a) w(free[static_cast<std::size_t>(a)]) = wf(a);
      }
      const Vector grad = H * w + g;
      for (Index i = 0; i < n && valid; ++i) {
        const int s = state[static_cast<std::size_t>(i)];
        if (s == 0 && (w(i) < lo(i) - tol || w(i) > hi(i) + tol)) valid = false;
        if (s == 1 && grad(i) < -tol) valid = false;
        if (s == 2 && grad(i) > tol) valid = false;
      }
      if (valid) {
        const double obj = 0.5 * w.dot(H * w) + g.dot(w);
        if (obj < best_obj) {
          best_obj = obj;
          best = w;
        }
      }
    }
    Index i = 0;
    while (i < n && state[static_cast<std::size_t>(i)] == 2) state[static_cast<std::size_t>(i++)] = 0;
    if (i == n) break;
    ++state[static_cast<std::size_t>(i)];
  }
  if (best.size() == 0) throw std::runtime_error("enumerate_box_qp: no KKT point found");
  return best;
}

}  // namespace ctlmpc::testing
