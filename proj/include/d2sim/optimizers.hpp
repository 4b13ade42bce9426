#ifndef D2SIM_OPTIMIZERS_HPP_
#define D2SIM_OPTIMIZERS_HPP_

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "d2sim/metrics.hpp"
#include "d2sim/mixing.hpp"
#include "d2sim/problems.hpp"
#include "d2sim/types.hpp"

namespace d2sim {

enum class Algorithm { d2, dpsgd, cpsgd };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

/// Local models of all workers, one column per worker, plus the one-step
/// history D2 needs. `X_prev`/`G_prev` stay zero for D-PSGD and C-PSGD.
template <typename Scalar>
struct OptimizerState {
  Algorithm algorithm = Algorithm::d2;
  Index t = 0;
  DynamicMatrix<Scalar> X;
  DynamicMatrix<Scalar> X_prev;
  DynamicMatrix<Scalar> G_prev;

  static OptimizerState initial(Algorithm algorithm, Index dim, Index workers) {
    OptimizerState s;
    s.algorithm = algorithm;
    s.X = DynamicMatrix<Scalar>::Zero(dim, workers);
    s.X_prev = DynamicMatrix<Scalar>::Zero(dim, workers);
    s.G_prev = DynamicMatrix<Scalar>::Zero(dim, workers);
    return s;
  }

  Index dim() const { return X.rows(); }
  Index workers() const { return X.cols(); }
  DynamicVector<Scalar> mean() const { return X.rowwise().mean(); }
};

namespace detail {

template <typename Scalar, typename Derived>
void check_step_inputs(const OptimizerState<Scalar>& state, const Eigen::MatrixBase<Derived>& grads,
                       Scalar gamma, Algorithm expected, const char* name) {
  if (state.algorithm != expected)
    throw std::invalid_argument(std::string(name) + ": state belongs to another algorithm");
  if (grads.rows() != state.X.rows() || grads.cols() != state.X.cols())
    throw std::invalid_argument(std::string(name) + ": gradient matrix shape mismatch");
  if (!(gamma > Scalar(0))) throw std::invalid_argument(std::string(name) + ": gamma must be positive");
}

template <typename Scalar, typename Derived>
void check_mixing(const OptimizerState<Scalar>& state, const Eigen::MatrixBase<Derived>& weights) {
  if (weights.rows() != state.X.cols() || weights.cols() != state.X.cols())
    throw std::invalid_argument("mixing matrix does not match the worker count");
}

}  // namespace detail

/**
 * One gossip round: column i of the result is sum_j W_ji half.col(j), where
 * only neighbours (W_ji != 0) contribute. Equals half * W.
 */
template <typename DerivedX, typename DerivedW>
DynamicMatrix<typename DerivedX::Scalar> gossip_average(const Eigen::MatrixBase<DerivedX>& half,
                                                        const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedX::Scalar;
  const Index n = half.cols();
  DynamicMatrix<Scalar> out = DynamicMatrix<Scalar>::Zero(half.rows(), n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (weights(j, i) != Scalar(0)) out.col(i).noalias() += Scalar(weights(j, i)) * half.col(j);
  return out;
}

/**
 * D2 round. t = 0: X_half = X - gamma G. Otherwise
 * X_half = 2 X_t - X_{t-1} - gamma G_t + gamma G_{t-1}. Then X_{t+1} = X_half W.
 */
template <typename Scalar, typename DerivedG, typename DerivedW>
OptimizerState<Scalar> d2_step(const OptimizerState<Scalar>& state,
                               const Eigen::MatrixBase<DerivedG>& grads,
                               const Eigen::MatrixBase<DerivedW>& weights, Scalar gamma) {
  detail::check_step_inputs(state, grads, gamma, Algorithm::d2, "d2_step");
  detail::check_mixing(state, weights);
  DynamicMatrix<Scalar> half;
  if (state.t == 0)
    half = state.X - gamma * grads;
  else
    half = Scalar(2) * state.X - state.X_prev - gamma * grads + gamma * state.G_prev;

  OptimizerState<Scalar> next;
  next.algorithm = Algorithm::d2;
  next.t = state.t + 1;
  next.X = gossip_average(half, weights);
  next.X_prev = state.X;
  next.G_prev = grads;
  return next;
}

/// D-PSGD round: X_{t+1} = X_t W - gamma G_t. The gradient is not mixed.
template <typename Scalar, typename DerivedG, typename DerivedW>
OptimizerState<Scalar> dpsgd_step(const OptimizerState<Scalar>& state,
                                  const Eigen::MatrixBase<DerivedG>& grads,
                                  const Eigen::MatrixBase<DerivedW>& weights, Scalar gamma) {
  detail::check_step_inputs(state, grads, gamma, Algorithm::dpsgd, "dpsgd_step");
  detail::check_mixing(state, weights);
  OptimizerState<Scalar> next;
  next.algorithm = Algorithm::dpsgd;
  next.t = state.t + 1;
  next.X = gossip_average(state.X, weights) - gamma * grads;
  next.X_prev = DynamicMatrix<Scalar>::Zero(state.X.rows(), state.X.cols());
  next.G_prev = next.X_prev;
  return next;
}

/// Centralized round: every worker receives x - gamma * mean_i g_i.
/// Rejects states whose columns are not identical.
template <typename Scalar, typename DerivedG>
OptimizerState<Scalar> cpsgd_step(const OptimizerState<Scalar>& state,
                                  const Eigen::MatrixBase<DerivedG>& grads, Scalar gamma) {
  detail::check_step_inputs(state, grads, gamma, Algorithm::cpsgd, "cpsgd_step");
  for (Index i = 1; i < state.X.cols(); ++i)
    if (state.X.col(i) != state.X.col(0))
      throw std::invalid_argument("cpsgd_step: workers do not share one model");
  const DynamicVector<Scalar> mean_grad = grads.rowwise().mean();
  const DynamicVector<Scalar> model = state.X.col(0) - gamma * mean_grad;
  OptimizerState<Scalar> next;
  next.algorithm = Algorithm::cpsgd;
  next.t = state.t + 1;
  next.X = model.replicate(1, state.X.cols());
  next.X_prev = DynamicMatrix<Scalar>::Zero(state.X.rows(), state.X.cols());
  next.G_prev = next.X_prev;
  return next;
}

/// Dispatches on `state.algorithm`.
OptimizerState<double> step(const OptimizerState<double>& state, const Matrix& grads,
                            const Matrix& weights, double gamma);

struct BatchSpec {
  Sampling sampling = Sampling::with_replacement;
  Index size = 1;

  bool operator==(const BatchSpec&) const = default;
};

/// Draws one minibatch gradient per worker at the columns of X, using the
/// (root seed, worker, iteration) stream of each worker.
Matrix sample_gradients(const ProblemInstance& problem, const Matrix& X, const BatchSpec& batch,
                        std::uint64_t root_seed, Index iteration,
                        std::vector<std::vector<Index>>* indices = nullptr);

/// Called after every applied round with (state, gradients fed to the round).
using StepObserver = std::function<void(const OptimizerState<double>& before, const Matrix& grads,
                                        const OptimizerState<double>& after)>;

struct RunOptions {
  Index log_every = 1;
  StepObserver observer;
};

struct Trajectory {
  Algorithm algorithm = Algorithm::d2;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  ProblemParams problem;
  std::vector<MetricRecord> records;
  std::vector<std::string> warnings;
  /// Column mean of X_T.
  Vector output;
};

/**
 * Runs T synchronous rounds from X_0 = 0 and logs metrics at t = 0, every
 * `log_every` rounds, and at T. Decentralized algorithms require a valid W;
 * a stepsize outside the provable regime only adds a warning.
 */
Trajectory run(Algorithm algorithm, const ProblemInstance& problem, const MixingMatrix& w,
               double gamma, Index T, const BatchSpec& batch, std::uint64_t seed,
               const RunOptions& options = {});

}  // namespace d2sim

#endif  // D2SIM_OPTIMIZERS_HPP_
