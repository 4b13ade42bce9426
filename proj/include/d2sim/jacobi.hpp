#ifndef D2SIM_JACOBI_HPP_
#define D2SIM_JACOBI_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Jacobi>

#include "d2sim/types.hpp"

namespace d2sim {

/// Raised when the cyclic sweep budget runs out before the off-diagonal
/// mass falls under tolerance.
class EigenConvergenceError : public std::runtime_error {
 public:
  EigenConvergenceError(double residual, int sweeps)
      : std::runtime_error("symmetric_eigen: no convergence after " +
                           std::to_string(sweeps) +
                           " sweeps, off-diagonal residual " +
                           std::to_string(residual)),
        residual_(residual),
        sweeps_(sweeps) {}

  double residual() const noexcept { return residual_; }
  int sweeps() const noexcept { return sweeps_; }

 private:
  double residual_;
  int sweeps_;
};

struct JacobiOptions {
  double symmetry_tolerance = 1e-10;
  /// Off-diagonal Frobenius norm target, relative to max(1, ||A||_F).
  double residual_tolerance = 1e-12;
  int max_sweeps = 100;
};

template <typename Scalar>
struct SymmetricEigen {
  DynamicVector<Scalar> eigenvalues;   // nonincreasing
  DynamicMatrix<Scalar> eigenvectors;  // column k pairs with eigenvalues(k)
  int sweeps = 0;
  Scalar residual = 0;
};

template <typename Derived>
typename Derived::Scalar off_diagonal_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Scalar sum = 0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

/// Flips each column so its first component of non-negligible magnitude is
/// positive.
template <typename Scalar>
void canonicalize_signs(DynamicMatrix<Scalar>& vectors) {
  const Scalar threshold = Scalar(1e-10);
  for (Index k = 0; k < vectors.cols(); ++k) {
    for (Index i = 0; i < vectors.rows(); ++i) {
      if (std::abs(vectors(i, k)) > threshold) {
        if (vectors(i, k) < 0) vectors.col(k) = -vectors.col(k);
        break;
      }
    }
  }
}

/**
 * Cyclic Jacobi eigendecomposition of a dense symmetric matrix.
 *
 * Returns A = P diag(lambda) P^T with lambda sorted nonincreasing and each
 * eigenvector sign-normalized. Rejects inputs whose asymmetry exceeds
 * `options.symmetry_tolerance`.
 */
template <typename Derived>
SymmetricEigen<typename Derived::Scalar> symmetric_eigen(
    const Eigen::MatrixBase<Derived>& matrix, const JacobiOptions& options = {}) {
  using Scalar = typename Derived::Scalar;
  const Index n = matrix.rows();
  if (matrix.cols() != n)
    throw std::invalid_argument("symmetric_eigen: matrix must be square");
  if (n == 0) throw std::invalid_argument("symmetric_eigen: empty matrix");

  const Scalar asymmetry = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (!(asymmetry <= options.symmetry_tolerance))
    throw std::invalid_argument("symmetric_eigen: input not symmetric (max |A-A^T| = " +
                                std::to_string(static_cast<double>(asymmetry)) + ")");

  DynamicMatrix<Scalar> a = (matrix + matrix.transpose()) / Scalar(2);
  DynamicMatrix<Scalar> v = DynamicMatrix<Scalar>::Identity(n, n);

  const Scalar tolerance =
      Scalar(options.residual_tolerance) * std::max(Scalar(1), a.norm());
  Scalar residual = off_diagonal_norm(a);
  int sweeps = 0;
  while (residual > tolerance) {
    if (sweeps == options.max_sweeps)
      throw EigenConvergenceError(static_cast<double>(residual), sweeps);
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rotation;
        rotation.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rotation.adjoint());
        a.applyOnTheRight(p, q, rotation);
        v.applyOnTheRight(p, q, rotation);
        a(p, q) = a(q, p) = Scalar(0);
      }
    }
    ++sweeps;
    residual = off_diagonal_norm(a);
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) > a(j, j); });

  SymmetricEigen<Scalar> result;
  result.eigenvalues.resize(n);
  result.eigenvectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    result.eigenvalues(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    result.eigenvectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  canonicalize_signs(result.eigenvectors);
  result.sweeps = sweeps;
  result.residual = residual;
  return result;
}

/// P diag(lambda) P^T.
template <typename Scalar>
DynamicMatrix<Scalar> reconstruct(const SymmetricEigen<Scalar>& eig) {
  return eig.eigenvectors * eig.eigenvalues.asDiagonal() * eig.eigenvectors.transpose();
}

}  // namespace d2sim

#endif  // D2SIM_JACOBI_HPP_
