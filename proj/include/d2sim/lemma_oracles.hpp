#ifndef D2SIM_LEMMA_ORACLES_HPP_
#define D2SIM_LEMMA_ORACLES_HPP_

// Executable forms of the auxiliary results behind the D2 analysis. They are
// used as independent oracles by the tests and by `d2sim lemma-check`.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2sim/types.hpp"

namespace d2sim {

/// a_0 = 0, a_1 given, a_{t+1} = rho (2 a_t - a_{t-1}) + beta_t for t >= 1.
/// beta[s - 1] holds beta_s; missing entries are zero.
template <typename Scalar>
struct RecurrenceSpec {
  Scalar rho = Scalar(0.5);
  Scalar a1 = Scalar(1);
  std::vector<Scalar> beta;
  Index horizon = 1;

  Scalar beta_at(Index s) const {
    const auto k = static_cast<std::size_t>(s - 1);
    return s >= 1 && k < beta.size() ? beta[k] : Scalar(0);
  }

  /// rho in (-1/3, 0) or (0, 1), horizon >= 1.
  bool in_domain() const {
    return horizon >= 1 && ((rho > Scalar(-1) / Scalar(3) && rho < Scalar(0)) ||
                            (rho > Scalar(0) && rho < Scalar(1)));
  }
};

/// a_1 .. a_horizon by direct recursion. Accepts any rho, including values
/// outside the convergent domain.
template <typename Scalar>
std::vector<Scalar> recurrence_direct(const RecurrenceSpec<Scalar>& spec) {
  if (spec.horizon < 1) throw std::invalid_argument("recurrence_direct: horizon must be >= 1");
  std::vector<Scalar> a;
  a.reserve(static_cast<std::size_t>(spec.horizon));
  Scalar previous = Scalar(0);
  Scalar current = spec.a1;
  a.push_back(current);
  for (Index t = 1; t < spec.horizon; ++t) {
    const Scalar next = spec.rho * (Scalar(2) * current - previous) + spec.beta_at(t);
    previous = current;
    current = next;
    a.push_back(current);
  }
  return a;
}

/**
 * a_1 .. a_horizon from the closed form of the recurrence.
 *
 * rho < 0: with real roots u, v = rho +- sqrt(rho^2 - rho),
 *   a_{t+1} = a_1 (u^{t+1} - v^{t+1})/(u - v) + sum_s beta_s (u^{t-s+1} - v^{t-s+1})/(u - v).
 * 0 < rho < 1: with theta = arccos(sqrt(rho)),
 *   a_{t+1} sin(theta) = a_1 rho^{t/2} sin((t+1) theta) + sum_s beta_s rho^{(t-s)/2} sin((t+1-s) theta).
 */
template <typename Scalar>
std::vector<Scalar> recurrence_closed_form(const RecurrenceSpec<Scalar>& spec) {
  if (!spec.in_domain())
    throw std::invalid_argument("recurrence_closed_form: rho must lie in (-1/3, 0) or (0, 1)");
  using std::pow;
  using std::sin;
  using std::sqrt;
  const Scalar rho = spec.rho;

  // kernel(k) is the coefficient multiplying a_1 at a_{k}, i.e. the response
  // after k - 1 steps; the beta_s contribution to a_{t+1} is kernel(t - s + 1).
  std::vector<Scalar> kernel(static_cast<std::size_t>(spec.horizon) + 1, Scalar(0));
  if (rho < Scalar(0)) {
    const Scalar root = sqrt(rho * rho - rho);
    const Scalar u = rho + root;
    const Scalar v = rho - root;
    for (Index k = 1; k <= spec.horizon; ++k)
      kernel[static_cast<std::size_t>(k)] =
          (pow(u, Scalar(k)) - pow(v, Scalar(k))) / (u - v);
  } else {
    const Scalar theta = std::acos(sqrt(rho));
    const Scalar s = sin(theta);
    for (Index k = 1; k <= spec.horizon; ++k)
      kernel[static_cast<std::size_t>(k)] =
          pow(rho, Scalar(k - 1) / Scalar(2)) * sin(Scalar(k) * theta) / s;
  }

  std::vector<Scalar> a;
  a.reserve(static_cast<std::size_t>(spec.horizon));
  for (Index t = 0; t < spec.horizon; ++t) {
    Scalar value = spec.a1 * kernel[static_cast<std::size_t>(t + 1)];
    for (Index s = 1; s <= t; ++s)
      value += spec.beta_at(s) * kernel[static_cast<std::size_t>(t - s + 1)];
    a.push_back(value);
  }
  return a;
}

template <typename Scalar>
struct GeometricSumReport {
  std::vector<Scalar> a;  // a_t = sum_{s <= t} rho^{t-s} b_s, t = 1..k
  Scalar S = 0;           // sum_t a_t
  Scalar D = 0;           // sum_t a_t^2
  Scalar S_bound = 0;     // sum_s b_s / (1 - rho)
  Scalar D_bound = 0;     // sum_s b_s^2 / (1 - rho)^2
  bool holds = false;
};

/// Evaluates both geometric-sum inequalities for b_1..b_k.
template <typename Scalar>
GeometricSumReport<Scalar> geometric_sum_bounds(Scalar rho, const std::vector<Scalar>& b, Index k) {
  if (!(rho >= Scalar(0) && rho < Scalar(1)))
    throw std::invalid_argument("geometric_sum_bounds: rho must lie in [0, 1)");
  if (k < 0 || static_cast<std::size_t>(k) > b.size())
    throw std::invalid_argument("geometric_sum_bounds: k exceeds the sequence length");
  GeometricSumReport<Scalar> r;
  Scalar a = 0;
  Scalar sum_b = 0;
  Scalar sum_b2 = 0;
  for (Index t = 0; t < k; ++t) {
    const Scalar bt = b[static_cast<std::size_t>(t)];
    if (bt < Scalar(0)) throw std::invalid_argument("geometric_sum_bounds: b must be non-negative");
    a = rho * a + bt;
    r.a.push_back(a);
    r.S += a;
    r.D += a * a;
    sum_b += bt;
    sum_b2 += bt * bt;
  }
  r.S_bound = sum_b / (Scalar(1) - rho);
  r.D_bound = sum_b2 / ((Scalar(1) - rho) * (Scalar(1) - rho));
  // Equality at rho = 0; allow for rounding.
  const Scalar slack = Scalar(1e-12);
  r.holds = r.S <= r.S_bound * (Scalar(1) + slack) + slack &&
            r.D <= r.D_bound * (Scalar(1) + slack) + slack;
  return r;
}

template <typename Scalar>
struct RotationReport {
  Scalar norm_sq = 0;          // ||X||_F^2
  Scalar rotated_sq = 0;       // ||X P||_F^2
  Scalar rotated_back_sq = 0;  // ||X P^T||_F^2
  Scalar tail_sq = 0;          // sum_{i >= 2} ||X v_i||^2
  Scalar max_residual = 0;     // largest |norm difference|
  bool holds = false;
};

/// Frobenius-norm invariance of X under the orthogonal P and the bound on
/// the components outside the leading eigenvector.
template <typename DerivedX, typename DerivedP>
RotationReport<typename DerivedX::Scalar> rotation_invariance_check(
    const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedP>& P,
    typename DerivedX::Scalar tolerance = 1e-8) {
  using Scalar = typename DerivedX::Scalar;
  const Index n = P.rows();
  if (P.cols() != n || X.cols() != n)
    throw std::invalid_argument("rotation_invariance_check: shape mismatch");
  const Scalar orth =
      (P.transpose() * P - DynamicMatrix<Scalar>::Identity(n, n)).cwiseAbs().maxCoeff();
  if (orth > Scalar(1e-8))
    throw std::invalid_argument("rotation_invariance_check: P is not orthogonal");

  RotationReport<Scalar> r;
  r.norm_sq = X.squaredNorm();
  const DynamicMatrix<Scalar> xp = X * P;
  r.rotated_sq = xp.squaredNorm();
  r.rotated_back_sq = (X * P.transpose()).squaredNorm();
  r.tail_sq = n > 1 ? xp.rightCols(n - 1).squaredNorm() : Scalar(0);
  using std::abs;
  using std::sqrt;
  r.max_residual = std::max(abs(sqrt(r.rotated_sq) - sqrt(r.norm_sq)),
                            abs(sqrt(r.rotated_back_sq) - sqrt(r.norm_sq)));
  r.holds = r.max_residual <= tolerance && r.tail_sq <= r.norm_sq + tolerance;
  return r;
}

/// Two forms of the negative-eigenvalue weight that appear in the analysis:
/// lambda_n^2 / (1 - |v|^2) (the one used for C2) and the intermediate
/// 2 lambda_n^2 / (1 - |v|)^2. Both are infinite at lambda_n = -1/3.
template <typename Scalar>
struct NegativeBranchWeights {
  Scalar modulus = 0;
  Scalar stated = 0;
  Scalar intermediate = 0;
};

template <typename Scalar>
NegativeBranchWeights<Scalar> negative_branch_weights(Scalar lambda_n) {
  if (!(lambda_n < Scalar(0) && lambda_n > Scalar(-1) / Scalar(3)))
    throw std::invalid_argument("negative_branch_weights: lambda_n must lie in (-1/3, 0)");
  NegativeBranchWeights<Scalar> w;
  w.modulus = std::sqrt(lambda_n * lambda_n - lambda_n) - lambda_n;
  w.stated = lambda_n * lambda_n / (Scalar(1) - w.modulus * w.modulus);
  w.intermediate = Scalar(2) * lambda_n * lambda_n / ((Scalar(1) - w.modulus) * (Scalar(1) - w.modulus));
  return w;
}

}  // namespace d2sim

#endif  // D2SIM_LEMMA_ORACLES_HPP_
