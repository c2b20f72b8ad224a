#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctlmpc {

/// Polynomial coefficients, ascending in s: c[0] + c[1] s + c[2] s^2 + ...
using Polynomial = std::vector<double>;

/// Degree after dropping trailing zero coefficients; -1 for the zero polynomial.
int degree(const Polynomial& p);
Polynomial multiply(const Polynomial& a, const Polynomial& b);
std::complex<double> evaluate(const Polynomial& p, std::complex<double> s);

/// SISO rational transfer function b(s)/a(s) * exp(-delay * s).
struct RationalTransfer {
  Polynomial num{0.0};
  Polynomial den{1.0};
  double delay = 0.0;  // seconds

  /// gain * prod(num_factors) / prod(den_factors), each factor constant-first.
  static RationalTransfer from_factors(double gain, const std::vector<Polynomial>& num_factors,
                                       const std::vector<Polynomial>& den_factors,
                                       double delay = 0.0);
  static RationalTransfer zero() { return {}; }

  int num_degree() const { return degree(num); }
  int den_degree() const { return degree(den); }
  bool is_zero() const { return num_degree() < 0; }
  bool is_proper() const { return num_degree() <= den_degree(); }
  bool is_strictly_proper() const { return num_degree() < den_degree(); }

  /// Rescales time: a model written in units of `seconds_per_unit` seconds
  /// becomes the same model in seconds (s^k coefficient times unit^k).
  RationalTransfer time_scaled(double seconds_per_unit) const;

  bool operator==(const RationalTransfer&) const = default;
};

class PoleAtPoint : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// b(s)/a(s) e^{-tau s}. Throws PoleAtPoint when |a(s)| < 1e-14.
std::complex<double> evaluate(const RationalTransfer& tf, std::complex<double> s);

enum class ChannelRole { Deterministic, Stochastic, Disturbance };

class TransferMatrix {
 public:
  TransferMatrix() = default;
  TransferMatrix(std::size_t rows, std::size_t cols, ChannelRole role);
  TransferMatrix(std::vector<std::vector<RationalTransfer>> entries, ChannelRole role);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  ChannelRole role() const { return role_; }

  const RationalTransfer& operator()(std::size_t i, std::size_t j) const {
    return entries_.at(i * cols_ + j);
  }
  RationalTransfer& operator()(std::size_t i, std::size_t j) { return entries_.at(i * cols_ + j); }

  /// Row/column layout for [G Gd] style concatenation.
  TransferMatrix hconcat(const TransferMatrix& right, ChannelRole role) const;

  bool operator==(const TransferMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  ChannelRole role_ = ChannelRole::Deterministic;
  std::vector<RationalTransfer> entries_;
};

enum class Rule {
  InvalidDenominator,
  InvalidDelay,
  Improper,
  NotStrictlyProper,
  DelayOnStochastic,
};

struct Violation {
  std::size_t row;
  std::size_t col;
  Rule rule;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(Rule rule) const;
  std::string to_string() const;
};

const char* to_string(Rule rule);

ValidationReport validate(const TransferMatrix& model);

}  // namespace ctlmpc
