#include "d2sim/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "d2sim/jacobi.hpp"

namespace d2sim {

namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Matrix gaussian_matrix(std::mt19937_64& gen, Index rows, Index cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(gen);
  return m;
}

Vector gaussian_vector(std::mt19937_64& gen, Index size) {
  std::normal_distribution<double> normal;
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = normal(gen);
  return v;
}

void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::least_squares: return "least-squares";
    case ObjectiveKind::logistic_regression: return "logistic-regression";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(std::string_view name) {
  if (name == "least-squares") return ObjectiveKind::least_squares;
  if (name == "logistic-regression" || name == "label-partition")
    return ObjectiveKind::logistic_regression;
  throw std::invalid_argument("unknown problem kind '" + std::string(name) + "'");
}

ProblemInstance::ProblemInstance(ProblemParams params, std::vector<Shard> shards)
    : params_(std::move(params)), shards_(std::move(shards)) {
  require(!shards_.empty(), "problem needs at least one worker");
  const Index features = shards_.front().features.cols();
  for (const auto& s : shards_) {
    require(s.size() > 0, "every shard must hold at least one sample");
    require(s.features.cols() == features, "shards disagree on the feature dimension");
    if (params_.kind == ObjectiveKind::least_squares)
      require(s.targets.size() == s.size(), "least-squares shard needs one target per sample");
    else
      require(static_cast<Index>(s.labels.size()) == s.size(), "logistic shard needs one label per sample");
  }
  dim_ = params_.kind == ObjectiveKind::least_squares ? features : features * params_.classes;
  for (Index i = 0; i < workers(); ++i) smoothness_ = std::max(smoothness_, local_smoothness(i));
}

double ProblemInstance::local_smoothness(Index worker) const {
  const Shard& s = shard(worker);
  const Matrix gram = s.features.transpose() * s.features / static_cast<double>(s.size());
  const double top = symmetric_eigen(gram, JacobiOptions{1e-8, 1e-12, 100}).eigenvalues(0);
  if (params_.kind == ObjectiveKind::least_squares) return top;
  return 0.25 * top + 2.0 * kLogisticRidge;
}

double ProblemInstance::sample_loss(const Shard& s, Index j, const Vector& x) const {
  if (params_.kind == ObjectiveKind::least_squares) {
    const double r = s.features.row(j).dot(x) - s.targets(j);
    return 0.5 * r * r;
  }
  const Index d = s.features.cols();
  const Eigen::Map<const Matrix> weights(x.data(), d, params_.classes);
  const Vector z = weights.transpose() * s.features.row(j).transpose();
  double total = 0.0;
  for (Index c = 0; c < params_.classes; ++c) {
    const double sign = s.labels[static_cast<std::size_t>(j)] == c ? 1.0 : -1.0;
    total += softplus(-sign * z(c));
  }
  return total;
}

void ProblemInstance::accumulate_sample_gradient(const Shard& s, Index j, const Vector& x,
                                                 double weight, Vector& out) const {
  if (params_.kind == ObjectiveKind::least_squares) {
    const double r = s.features.row(j).dot(x) - s.targets(j);
    out.noalias() += (weight * r) * s.features.row(j).transpose();
    return;
  }
  const Index d = s.features.cols();
  const Eigen::Map<const Matrix> weights(x.data(), d, params_.classes);
  Eigen::Map<Matrix> grad(out.data(), d, params_.classes);
  const Vector z = weights.transpose() * s.features.row(j).transpose();
  for (Index c = 0; c < params_.classes; ++c) {
    const double sign = s.labels[static_cast<std::size_t>(j)] == c ? 1.0 : -1.0;
    grad.col(c).noalias() += (-weight * sign * logistic(-sign * z(c))) * s.features.row(j).transpose();
  }
  out.noalias() += weight * 2.0 * kLogisticRidge * x;
}

double ProblemInstance::local_loss(Index worker, const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("local_loss: dimension mismatch");
  const Shard& s = shard(worker);
  const auto m = static_cast<double>(s.size());
  if (params_.kind == ObjectiveKind::least_squares)
    return 0.5 * (s.features * x - s.targets).squaredNorm() / m;
  double total = 0.0;
  for (Index j = 0; j < s.size(); ++j) total += sample_loss(s, j, x);
  return total / m + kLogisticRidge * x.squaredNorm();
}

double ProblemInstance::loss(const Vector& x) const {
  double total = 0.0;
  for (Index i = 0; i < workers(); ++i) total += local_loss(i, x);
  return total / static_cast<double>(workers());
}

Vector ProblemInstance::full_local_gradient(Index worker, const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("full_local_gradient: dimension mismatch");
  const Shard& s = shard(worker);
  const auto m = static_cast<double>(s.size());
  if (params_.kind == ObjectiveKind::least_squares)
    return s.features.transpose() * (s.features * x - s.targets) / m;

  const Index d = s.features.cols();
  const Index classes = params_.classes;
  const Eigen::Map<const Matrix> weights(x.data(), d, classes);
  Matrix coeff = s.features * weights;  // m x classes margins
  for (Index j = 0; j < s.size(); ++j) {
    for (Index c = 0; c < classes; ++c) {
      const double sign = s.labels[static_cast<std::size_t>(j)] == c ? 1.0 : -1.0;
      coeff(j, c) = -sign * logistic(-sign * coeff(j, c));
    }
  }
  Vector out(dim_);
  Eigen::Map<Matrix>(out.data(), d, classes) = s.features.transpose() * coeff / m;
  out.noalias() += 2.0 * kLogisticRidge * x;
  return out;
}

Vector ProblemInstance::full_gradient(const Vector& x) const {
  Vector total = Vector::Zero(dim_);
  for (Index i = 0; i < workers(); ++i) total += full_local_gradient(i, x);
  return total / static_cast<double>(workers());
}

Vector ProblemInstance::sample_gradient(Index worker, Index sample, const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("sample_gradient: dimension mismatch");
  const Shard& s = shard(worker);
  if (sample < 0 || sample >= s.size()) throw std::out_of_range("sample_gradient: sample index");
  Vector out = Vector::Zero(dim_);
  accumulate_sample_gradient(s, sample, x, 1.0, out);
  return out;
}

ProblemInstance gen_least_squares(Index n, Index dim, Index samples_per_worker,
                                  double heterogeneity, double noise, std::uint64_t seed) {
  require(n >= 1 && dim >= 1 && samples_per_worker >= 1, "gen_least_squares: counts must be >= 1");
  require(heterogeneity >= 0.0 && noise >= 0.0, "gen_least_squares: knobs must be non-negative");

  std::mt19937_64 gen(seed);
  const Matrix design = gaussian_matrix(gen, samples_per_worker, dim);
  const Vector truth = gaussian_vector(gen, dim);
  const Vector eps = gaussian_vector(gen, samples_per_worker);
  // Unit-variance entries for every heterogeneity level.
  const double scale = 1.0 / std::sqrt(1.0 + heterogeneity * heterogeneity);

  std::vector<Shard> shards;
  shards.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Matrix perturbation = gaussian_matrix(gen, samples_per_worker, dim);
    Vector direction = gaussian_vector(gen, dim);
    direction.normalize();
    Shard s;
    s.features = heterogeneity == 0.0 ? design : Matrix(scale * (design + heterogeneity * perturbation));
    s.targets = s.features * (truth + heterogeneity * direction) + noise * eps;
    shards.push_back(std::move(s));
  }

  ProblemParams params;
  params.kind = ObjectiveKind::least_squares;
  params.n_workers = n;
  params.features = dim;
  params.samples_per_worker = samples_per_worker;
  params.heterogeneity = heterogeneity;
  params.noise = noise;
  params.classes = 0;
  params.seed = seed;
  return ProblemInstance(params, std::move(shards));
}

ProblemInstance gen_label_partition(Index n, Index dim, Index classes, Index samples_per_class,
                                    bool shuffled, std::uint64_t seed, double spread) {
  require(n >= 1 && dim >= 1 && classes >= 2 && samples_per_class >= 1,
          "gen_label_partition: need n, dim, samples_per_class >= 1 and classes >= 2");
  require(spread >= 0.0, "gen_label_partition: spread must be non-negative");
  if (!shuffled && classes % n != 0)
    throw std::invalid_argument("gen_label_partition: " + std::to_string(classes) +
                                " classes cannot be split evenly over " + std::to_string(n) +
                                " workers");
  const Index total = classes * samples_per_class;
  require(total >= n, "gen_label_partition: fewer samples than workers");

  std::mt19937_64 gen(seed);
  const Matrix centers = gaussian_matrix(gen, classes, dim);
  Matrix pool(total, dim);
  std::vector<int> pool_labels(static_cast<std::size_t>(total));
  std::normal_distribution<double> normal;
  for (Index c = 0; c < classes; ++c) {
    for (Index k = 0; k < samples_per_class; ++k) {
      const Index p = c * samples_per_class + k;
      for (Index j = 0; j < dim; ++j) pool(p, j) = centers(c, j) + spread * normal(gen);
      pool_labels[static_cast<std::size_t>(p)] = static_cast<int>(c);
    }
  }

  std::vector<std::vector<Index>> owned(static_cast<std::size_t>(n));
  if (shuffled) {
    std::vector<Index> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), gen);
    for (std::size_t pos = 0; pos < order.size(); ++pos)
      owned[pos % static_cast<std::size_t>(n)].push_back(order[pos]);
    for (auto& list : owned) std::sort(list.begin(), list.end());
  } else {
    const Index per_worker = classes / n;
    for (Index w = 0; w < n; ++w)
      for (Index p = w * per_worker * samples_per_class; p < (w + 1) * per_worker * samples_per_class; ++p)
        owned[static_cast<std::size_t>(w)].push_back(p);
  }

  std::vector<Shard> shards;
  shards.reserve(static_cast<std::size_t>(n));
  for (const auto& list : owned) {
    Shard s;
    s.features.resize(static_cast<Index>(list.size()), dim);
    for (std::size_t r = 0; r < list.size(); ++r) {
      s.features.row(static_cast<Index>(r)) = pool.row(list[r]);
      s.labels.push_back(pool_labels[static_cast<std::size_t>(list[r])]);
    }
    shards.push_back(std::move(s));
  }

  ProblemParams params;
  params.kind = ObjectiveKind::logistic_regression;
  params.n_workers = n;
  params.features = dim;
  params.samples_per_worker = total / n;
  params.noise = spread;
  params.classes = classes;
  params.shuffled = shuffled;
  params.seed = seed;
  return ProblemInstance(params, std::move(shards));
}

ProblemInstance make_problem(const ProblemParams& p) {
  if (p.kind == ObjectiveKind::least_squares)
    return gen_least_squares(p.n_workers, p.features, p.samples_per_worker, p.heterogeneity,
                             p.noise, p.seed);
  const Index total = p.n_workers * p.samples_per_worker;
  if (p.classes < 2 || total % p.classes != 0)
    throw std::invalid_argument("logistic problem: n_workers * samples_per_worker (" +
                                std::to_string(total) + ") must be a multiple of classes (" +
                                std::to_string(p.classes) + ")");
  return gen_label_partition(p.n_workers, p.features, p.classes, total / p.classes, p.shuffled,
                             p.seed, p.noise);
}

GradientSample stochastic_gradient(const ProblemInstance& problem, Index worker, const Vector& x,
                                   Index batch_size, CounterRng& rng, Sampling sampling) {
  const Shard& s = problem.shard(worker);
  GradientSample sample;
  sample.worker = worker;
  if (sampling == Sampling::full_batch) {
    sample.value = problem.full_local_gradient(worker, x);
    sample.indices.resize(static_cast<std::size_t>(s.size()));
    std::iota(sample.indices.begin(), sample.indices.end(), Index{0});
    return sample;
  }
  if (batch_size < 1 || batch_size > s.size())
    throw std::invalid_argument("stochastic_gradient: batch size must lie in [1, shard size]");
  sample.value = Vector::Zero(problem.dim());
  sample.indices.reserve(static_cast<std::size_t>(batch_size));
  for (Index b = 0; b < batch_size; ++b)
    sample.indices.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(s.size()))));
  for (Index j : sample.indices) sample.value += problem.sample_gradient(worker, j, x);
  sample.value /= static_cast<double>(batch_size);
  return sample;
}

double heterogeneity_at_origin(const ProblemInstance& problem) {
  const Index n = problem.workers();
  const Vector origin = Vector::Zero(problem.dim());
  std::vector<Vector> local;
  local.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) local.push_back(problem.full_local_gradient(i, origin));
  // (1/n) sum_i ||g_i - mean||^2 == (1/n^2) sum_{i<j} ||g_i - g_j||^2
  double total = 0.0;
  for (std::size_t i = 0; i < local.size(); ++i)
    for (std::size_t j = i + 1; j < local.size(); ++j) total += (local[i] - local[j]).squaredNorm();
  return total / static_cast<double>(n * n);
}

VarianceEstimates estimate_variances(const ProblemInstance& problem,
                                     const std::vector<Vector>& probe_points, Index samples,
                                     std::uint64_t seed) {
  if (probe_points.empty()) throw std::invalid_argument("estimate_variances: no probe points");
  if (samples < 1) throw std::invalid_argument("estimate_variances: samples must be >= 1");
  VarianceEstimates out;
  for (std::size_t p = 0; p < probe_points.size(); ++p) {
    const Vector& x = probe_points[p];
    for (Index i = 0; i < problem.workers(); ++i) {
      const Vector exact = problem.full_local_gradient(i, x);
      CounterRng rng(seed, static_cast<std::uint64_t>(i), p);
      double total = 0.0;
      for (Index k = 0; k < samples; ++k) {
        const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(problem.shard(i).size())));
        total += (problem.sample_gradient(i, j, x) - exact).squaredNorm();
      }
      out.sigma_sq = std::max(out.sigma_sq, total / static_cast<double>(samples));
    }
  }
  out.zeta0 = heterogeneity_at_origin(problem);
  return out;
}

}  // namespace d2sim
