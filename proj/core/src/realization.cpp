#include "ctlmpc/realization.hpp"

#include <stdexcept>
#include <string>

namespace ctlmpc {

std::complex<double> frequency_response(const DelayedSisoSS& ss, std::complex<double> s) {
  std::complex<double> gain = ss.D.size() > 0 ? ss.D(0, 0) : 0.0;
  if (ss.order() > 0) {
    const Eigen::MatrixXcd pencil =
        s * Eigen::MatrixXcd::Identity(ss.order(), ss.order()) - ss.A.cast<std::complex<double>>();
    const Eigen::VectorXcd x = pencil.partialPivLu().solve(ss.B.cast<std::complex<double>>().col(0));
    gain += (ss.C.cast<std::complex<double>>() * x)(0, 0);
  }
  return gain * std::exp(-ss.delay * s);
}

DelayedSisoSS realize_siso(const RationalTransfer& tf, std::size_t output, std::size_t input) {
  const int n = tf.den_degree();
  if (n < 0) throw std::invalid_argument("realize_siso: zero denominator");
  if (!tf.is_proper()) throw std::invalid_argument("realize_siso: transfer function is not proper");

  const double lead = tf.den[static_cast<std::size_t>(n)];
  auto den = [&](int k) { return tf.den[static_cast<std::size_t>(k)] / lead; };
  auto num = [&](int k) {
    return k < static_cast<int>(tf.num.size()) ? tf.num[static_cast<std::size_t>(k)] / lead : 0.0;
  };

  DelayedSisoSS ss;
  ss.delay = tf.delay;
  ss.input = input;
  ss.output = output;
  ss.A = Matrix::Zero(n, n);
  ss.B = Matrix::Zero(n, 1);
  ss.C = Matrix::Zero(1, n);
  ss.D = Matrix::Zero(1, 1);

  // Biproper part: b(s) = d a(s) + r(s), deg r < n.
  const double feedthrough = num(n);
  ss.D(0, 0) = feedthrough;
  if (n == 0) return ss;

  for (int k = 0; k + 1 < n; ++k) ss.A(k, k + 1) = 1.0;
  for (int k = 0; k < n; ++k) {
    ss.A(n - 1, k) = -den(k);
    ss.C(0, k) = num(k) - feedthrough * den(k);
  }
  ss.B(n - 1, 0) = 1.0;
  return ss;
}

std::vector<DelayedSisoSS> realize_channels(const TransferMatrix& model) {
  std::vector<DelayedSisoSS> channels;
  for (std::size_t j = 0; j < model.cols(); ++j) {
    for (std::size_t i = 0; i < model.rows(); ++i) {
      if (model(i, j).is_zero()) continue;
      channels.push_back(realize_siso(model(i, j), i, j));
    }
  }
  return channels;
}

NsRealization realize_ns(const TransferMatrix& G, const TransferMatrix& H) {
  if (H.cols() > 0 && G.rows() != H.rows()) {
    throw std::invalid_argument("realize_ns: G has " + std::to_string(G.rows()) + " rows but H has " +
                                std::to_string(H.rows()));
  }
  for (const TransferMatrix* m : {&G, &H}) {
    const ValidationReport report = validate(*m);
    if (!report.ok()) throw std::invalid_argument("realize_ns: invalid model\n" + report.to_string());
  }
  if (H.cols() > 0 && H.role() != ChannelRole::Stochastic) {
    throw std::invalid_argument("realize_ns: H must carry the stochastic role");
  }

  NsRealization ns;
  ns.n_z = G.rows();
  ns.n_u = G.cols();
  ns.n_w = H.cols();

  // Deterministic channels keep zero entries (as empty models) so channel(i, j) is total.
  ns.det_channels.reserve(ns.n_z * ns.n_u);
  for (std::size_t j = 0; j < ns.n_u; ++j) {
    for (std::size_t i = 0; i < ns.n_z; ++i) {
      const RationalTransfer& g = G(i, j);
      ns.det_channels.push_back(realize_siso(g.is_zero() ? RationalTransfer::zero() : g, i, j));
    }
  }

  const std::vector<DelayedSisoSS> parts = realize_channels(H);
  Index n = 0;
  for (const auto& p : parts) n += p.order();
  const auto nz = static_cast<Index>(ns.n_z);
  const auto nw = static_cast<Index>(ns.n_w);
  ns.stoch.A = Matrix::Zero(n, n);
  ns.stoch.B = Matrix::Zero(n, nw);
  ns.stoch.C = Matrix::Zero(nz, n);
  Index offset = 0;
  for (const auto& p : parts) {
    const Index k = p.order();
    ns.stoch.A.block(offset, offset, k, k) = p.A;
    ns.stoch.B.block(offset, static_cast<Index>(p.input), k, 1) = p.B;
    ns.stoch.C.block(static_cast<Index>(p.output), offset, 1, k) = p.C;
    offset += k;
  }
  return ns;
}

}  // namespace ctlmpc
