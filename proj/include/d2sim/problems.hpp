#ifndef D2SIM_PROBLEMS_HPP_
#define D2SIM_PROBLEMS_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

#include "d2sim/rng.hpp"
#include "d2sim/types.hpp"

namespace d2sim {

enum class ObjectiveKind { least_squares, logistic_regression };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(std::string_view name);

/// Ridge coefficient added to every logistic-regression worker objective.
inline constexpr double kLogisticRidge = 1e-4;

/// One worker's data. Rows of `features` are samples; least-squares shards
/// use `targets`, logistic shards use `labels` in [0, classes).
struct Shard {
  Matrix features;
  Vector targets;
  std::vector<int> labels;

  Index size() const noexcept { return features.rows(); }
};

/// Generator parameters; an instance is a pure function of these.
struct ProblemParams {
  ObjectiveKind kind = ObjectiveKind::least_squares;
  Index n_workers = 1;
  /// Feature dimension. The model dimension equals this for least squares
  /// and features * classes for one-vs-all logistic regression.
  Index features = 1;
  Index samples_per_worker = 1;
  double heterogeneity = 0.0;
  /// Target noise scale (least squares) or blob spread (logistic).
  double noise = 0.0;
  Index classes = 2;
  bool shuffled = false;
  std::uint64_t seed = 0;

  bool operator==(const ProblemParams&) const = default;
};

/**
 * Decentralized objective f(x) = (1/n) sum_i f_i(x), where f_i is the average
 * loss over worker i's shard.
 *
 *  - least squares:  f_i(x) = (1/2m) ||A_i x - b_i||^2
 *  - logistic:       f_i(x) = (1/m) sum_j sum_c log(1 + exp(-s_jc w_c^T a_j))
 *                             + kLogisticRidge ||x||^2,  s_jc = +1 iff label_j = c
 *
 * Immutable after construction.
 */
class ProblemInstance {
 public:
  ProblemInstance(ProblemParams params, std::vector<Shard> shards);

  const ProblemParams& params() const noexcept { return params_; }
  ObjectiveKind kind() const noexcept { return params_.kind; }
  Index workers() const noexcept { return static_cast<Index>(shards_.size()); }
  Index dim() const noexcept { return dim_; }
  double smoothness() const noexcept { return smoothness_; }
  const Shard& shard(Index worker) const { return shards_.at(static_cast<std::size_t>(worker)); }

  double local_loss(Index worker, const Vector& x) const;
  double loss(const Vector& x) const;

  Vector full_local_gradient(Index worker, const Vector& x) const;
  /// (1/n) sum_i grad f_i(x).
  Vector full_gradient(const Vector& x) const;
  /// Gradient of the single-sample loss F_i(x; sample), ridge included, so
  /// that the mean over the shard is the full local gradient.
  Vector sample_gradient(Index worker, Index sample, const Vector& x) const;

  /// Largest eigenvalue of the local Hessian bound (A_i^T A_i / m, scaled by
  /// 1/4 plus ridge for logistic) for one worker.
  double local_smoothness(Index worker) const;

 private:
  void accumulate_sample_gradient(const Shard& shard, Index sample, const Vector& x,
                                  double weight, Vector& out) const;
  double sample_loss(const Shard& shard, Index sample, const Vector& x) const;

  ProblemParams params_;
  std::vector<Shard> shards_;
  Index dim_ = 0;
  double smoothness_ = 0.0;
};

/**
 * Least squares with a heterogeneity knob h. Worker i holds the design
 * A_i = (A + h E_i) / sqrt(1 + h^2) and targets A_i (x* + h u_i) + noise * e,
 * where A, x*, e are shared, E_i is a per-worker Gaussian perturbation and
 * u_i a seeded unit direction. h = 0 makes every f_i identical.
 */
ProblemInstance gen_least_squares(Index n, Index dim, Index samples_per_worker,
                                  double heterogeneity, double noise, std::uint64_t seed);

/**
 * Gaussian-blob multiclass data for one-vs-all logistic regression.
 * Unshuffled: worker w owns classes [w k, (w+1) k), k = classes / n.
 * Shuffled: the pooled samples are permuted and dealt round-robin.
 * Within a shard samples keep their pool order.
 */
ProblemInstance gen_label_partition(Index n, Index dim, Index classes, Index samples_per_class,
                                    bool shuffled, std::uint64_t seed, double spread = 1.0);

/// Rebuilds an instance from its generator parameters.
ProblemInstance make_problem(const ProblemParams& params);

enum class Sampling { with_replacement, full_batch };

struct GradientSample {
  Index worker = 0;
  Vector value;
  std::vector<Index> indices;
};

/// Minibatch gradient for one worker. With replacement, indices are drawn
/// uniformly from the shard through `rng`; full_batch ignores `rng` and
/// `batch_size` and returns the exact local gradient.
GradientSample stochastic_gradient(const ProblemInstance& problem, Index worker, const Vector& x,
                                   Index batch_size, CounterRng& rng,
                                   Sampling sampling = Sampling::with_replacement);

struct VarianceEstimates {
  double sigma_sq = 0.0;
  double zeta0 = 0.0;
};

/// (1/n) sum_i ||grad f_i(0) - grad f(0)||^2, exact.
double heterogeneity_at_origin(const ProblemInstance& problem);

/// sigma_sq is the max over workers and probes of the empirical variance of
/// `samples` singleton stochastic gradients; zeta0 is exact.
VarianceEstimates estimate_variances(const ProblemInstance& problem,
                                     const std::vector<Vector>& probe_points, Index samples,
                                     std::uint64_t seed);

}  // namespace d2sim

#endif  // D2SIM_PROBLEMS_HPP_
