#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>

namespace ctlmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// (A + A') / 2
inline Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace ctlmpc
