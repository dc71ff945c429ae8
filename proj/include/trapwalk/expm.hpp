#pragma once

// Dense matrix-exponential oracle. Backed by Eigen's Pade scaling-and-squaring
// so it shares nothing with the RK4 path it is used to check.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "trapwalk/integrator.hpp"
#include "trapwalk/lattice.hpp"

namespace trapwalk {

inline constexpr std::size_t kMaxDenseOracleSites = 1024;

template <class T>
using DenseMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
DenseMatrix<T> to_dense(const Tridiagonal<T>& op) {
  const auto n = static_cast<Eigen::Index>(op.size());
  DenseMatrix<T> m = DenseMatrix<T>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = op.diag[static_cast<std::size_t>(i)];
    if (i > 0) m(i, i - 1) = op.lower[static_cast<std::size_t>(i)];
    if (i + 1 < n) m(i, i + 1) = op.upper[static_cast<std::size_t>(i)];
  }
  return m;
}

/// Column `column` of exp(t * op).
template <class T>
std::vector<T> expm_column(const Tridiagonal<T>& op, double t, std::size_t column) {
  if (op.size() > kMaxDenseOracleSites) {
    throw InvalidSpec("grid of " + std::to_string(op.size()) + " sites too large for dense oracle (max " +
                      std::to_string(kMaxDenseOracleSites) + ")");
  }
  const DenseMatrix<T> e = (to_dense(op) * T(t)).exp();
  std::vector<T> out(op.size());
  for (std::size_t i = 0; i < op.size(); ++i) {
    out[i] = e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(column));
  }
  return out;
}

}  // namespace trapwalk
