#include "ctlmpc/transfer_model.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace ctlmpc {

int degree(const Polynomial& p) {
  for (int k = static_cast<int>(p.size()) - 1; k >= 0; --k) {
    if (p[static_cast<std::size_t>(k)] != 0.0) return k;
  }
  return -1;
}

Polynomial multiply(const Polynomial& a, const Polynomial& b) {
  if (a.empty() || b.empty()) return {0.0};
  Polynomial out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

std::complex<double> evaluate(const Polynomial& p, std::complex<double> s) {
  std::complex<double> acc = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * s + *it;
  return acc;
}

RationalTransfer RationalTransfer::from_factors(double gain, const std::vector<Polynomial>& num_factors,
                                                const std::vector<Polynomial>& den_factors,
                                                double delay) {
  Polynomial num{gain};
  for (const auto& f : num_factors) num = multiply(num, f);
  Polynomial den{1.0};
  for (const auto& f : den_factors) den = multiply(den, f);
  return RationalTransfer{std::move(num), std::move(den), delay};
}

RationalTransfer RationalTransfer::time_scaled(double seconds_per_unit) const {
  RationalTransfer out = *this;
  double scale = 1.0;
  for (std::size_t k = 0; k < std::max(out.num.size(), out.den.size()); ++k) {
    if (k < out.num.size()) out.num[k] *= scale;
    if (k < out.den.size()) out.den[k] *= scale;
    scale *= seconds_per_unit;
  }
  out.delay *= seconds_per_unit;
  return out;
}

std::complex<double> evaluate(const RationalTransfer& tf, std::complex<double> s) {
  const std::complex<double> a = evaluate(tf.den, s);
  if (std::abs(a) < 1e-14) {
    std::ostringstream msg;
    msg << "transfer function has a pole at s = " << s;
    throw PoleAtPoint(msg.str());
  }
  return evaluate(tf.num, s) / a * std::exp(-tf.delay * s);
}

TransferMatrix::TransferMatrix(std::size_t rows, std::size_t cols, ChannelRole role)
    : rows_(rows), cols_(cols), role_(role), entries_(rows * cols) {}

TransferMatrix::TransferMatrix(std::vector<std::vector<RationalTransfer>> entries, ChannelRole role)
    : rows_(entries.size()), cols_(entries.empty() ? 0 : entries.front().size()), role_(role) {
  entries_.reserve(rows_ * cols_);
  for (auto& row : entries) {
    if (row.size() != cols_) throw std::invalid_argument("transfer matrix rows have unequal length");
    for (auto& e : row) entries_.push_back(std::move(e));
  }
}

TransferMatrix TransferMatrix::hconcat(const TransferMatrix& right, ChannelRole role) const {
  if (right.rows_ != rows_) throw std::invalid_argument("hconcat: row count mismatch");
  TransferMatrix out(rows_, cols_ + right.cols_, role);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j);
    for (std::size_t j = 0; j < right.cols_; ++j) out(i, cols_ + j) = right(i, j);
  }
  return out;
}

const char* to_string(Rule rule) {
  switch (rule) {
    case Rule::InvalidDenominator: return "denominator is the zero polynomial";
    case Rule::InvalidDelay: return "delay must be finite and nonnegative";
    case Rule::Improper: return "transfer function is not proper";
    case Rule::NotStrictlyProper: return "stochastic entry is not strictly proper";
    case Rule::DelayOnStochastic: return "stochastic entry carries a time delay";
  }
  return "unknown rule";
}

bool ValidationReport::has(Rule rule) const {
  for (const auto& v : violations) {
    if (v.rule == rule) return true;
  }
  return false;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "valid";
  std::ostringstream out;
  for (const auto& v : violations) {
    out << "(" << v.row << ", " << v.col << "): " << ctlmpc::to_string(v.rule) << "\n";
  }
  return out.str();
}

ValidationReport validate(const TransferMatrix& model) {
  ValidationReport report;
  const bool stochastic = model.role() == ChannelRole::Stochastic;
  for (std::size_t i = 0; i < model.rows(); ++i) {
    for (std::size_t j = 0; j < model.cols(); ++j) {
      const RationalTransfer& g = model(i, j);
      auto add = [&](Rule r) { report.violations.push_back({i, j, r}); };
      if (g.den_degree() < 0) {
        add(Rule::InvalidDenominator);
        continue;
      }
      if (!std::isfinite(g.delay) || g.delay < 0.0) add(Rule::InvalidDelay);
      if (!g.is_proper()) add(Rule::Improper);
      if (stochastic) {
        if (g.is_proper() && !g.is_strictly_proper()) add(Rule::NotStrictlyProper);
        if (g.delay != 0.0) add(Rule::DelayOnStochastic);
      }
    }
  }
  return report;
}

}  // namespace ctlmpc
