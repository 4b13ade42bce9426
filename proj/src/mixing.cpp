#include "d2sim/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <stdexcept>

namespace d2sim {

namespace {

std::string format_number(double x) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.6g", x);
  return buffer;
}

bool graph_connected(Index n, const std::vector<std::vector<Index>>& adjacency) {
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::queue<Index> frontier;
  frontier.push(0);
  seen[0] = true;
  Index reached = 1;
  while (!frontier.empty()) {
    const Index u = frontier.front();
    frontier.pop();
    for (Index w : adjacency[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = true;
        ++reached;
        frontier.push(w);
      }
    }
  }
  return reached == n;
}

}  // namespace

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::ring: return "ring";
    case TopologyKind::complete: return "complete";
    case TopologyKind::star: return "star";
    case TopologyKind::custom: return "custom";
  }
  return "unknown";
}

TopologyKind parse_topology_kind(std::string_view name) {
  if (name == "ring") return TopologyKind::ring;
  if (name == "complete") return TopologyKind::complete;
  if (name == "star") return TopologyKind::star;
  if (name == "custom") return TopologyKind::custom;
  throw std::invalid_argument("unknown topology kind '" + std::string(name) + "'");
}

Topology::Topology(Index n, std::vector<Edge> edges, TopologyKind kind)
    : n_(n), kind_(kind), adjacency_(static_cast<std::size_t>(std::max<Index>(n, 0))) {
  if (n < 1) throw std::invalid_argument("topology needs at least one worker");
  for (auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n)
      throw std::invalid_argument("edge references a worker outside [0, n)");
    if (a == b) throw std::invalid_argument("self-loop edges are not stored in a topology");
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (const auto& [a, b] : edges) {
    adjacency_[static_cast<std::size_t>(a)].push_back(b);
    adjacency_[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());
  edges_ = std::move(edges);
  if (!graph_connected(n_, adjacency_)) throw std::invalid_argument("topology is not connected");
}

bool Topology::connected(Index i, Index j) const {
  const auto& list = neighbors(i);
  return std::binary_search(list.begin(), list.end(), j);
}

bool Topology::is_regular() const {
  const Index d = degree(0);
  for (Index i = 1; i < n_; ++i)
    if (degree(i) != d) return false;
  return true;
}

Topology build_topology(TopologyKind kind, Index n) {
  std::vector<Topology::Edge> edges;
  switch (kind) {
    case TopologyKind::ring:
      if (n < 3) throw std::invalid_argument("ring topology needs n >= 3 (got " + std::to_string(n) + ")");
      for (Index i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
      break;
    case TopologyKind::complete:
      if (n < 1) throw std::invalid_argument("complete topology needs n >= 1 (got " + std::to_string(n) + ")");
      for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      break;
    case TopologyKind::star:
      if (n < 2) throw std::invalid_argument("star topology needs n >= 2 (got " + std::to_string(n) + ")");
      for (Index i = 1; i < n; ++i) edges.emplace_back(0, i);
      break;
    case TopologyKind::custom:
      throw std::invalid_argument("custom topologies are built from an explicit edge list");
  }
  return Topology(n, std::move(edges), kind);
}

std::string_view to_string(MixingScheme scheme) {
  switch (scheme) {
    case MixingScheme::uniform_neighbor: return "uniform-neighbor";
    case MixingScheme::lazy_metropolis: return "lazy-metropolis";
    case MixingScheme::mean_all: return "mean-all";
  }
  return "unknown";
}

MixingScheme parse_mixing_scheme(std::string_view name) {
  if (name == "uniform-neighbor") return MixingScheme::uniform_neighbor;
  if (name == "lazy-metropolis") return MixingScheme::lazy_metropolis;
  if (name == "mean-all") return MixingScheme::mean_all;
  throw std::invalid_argument("unknown mixing scheme '" + std::string(name) + "'");
}

MixingMatrix::MixingMatrix(const Topology& topology, Matrix weights, std::string kind_label)
    : weights_(std::move(weights)), kind_(std::move(kind_label)) {
  const Index n = topology.size();
  if (weights_.rows() != n || weights_.cols() != n)
    throw std::logic_error("mixing matrix shape does not match topology");
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (std::abs(weights_(i, j) - weights_(j, i)) > 1e-12)
        throw std::logic_error("mixing matrix is not symmetric");
      if (i != j && weights_(i, j) != 0.0 && !topology.connected(i, j))
        throw std::logic_error("mixing matrix has weight on a non-edge");
    }
    if (std::abs(weights_.row(i).sum() - 1.0) > kStochasticTolerance)
      throw std::logic_error("mixing matrix rows do not sum to one");
  }
  eigen_ = symmetric_eigen(weights_);
}

double MixingMatrix::lambda() const {
  return size() > 1 ? eigen_.eigenvalues(1) : 0.0;
}

MixingMatrix build_mixing_matrix(const Topology& topology, MixingScheme scheme,
                                 std::optional<double> self_weight) {
  const Index n = topology.size();
  Matrix w = Matrix::Zero(n, n);
  std::string label(to_string(scheme));

  if (self_weight && scheme != MixingScheme::uniform_neighbor)
    throw std::invalid_argument("self-weight override applies to uniform-neighbor only");

  switch (scheme) {
    case MixingScheme::uniform_neighbor: {
      // Equal weights are symmetric only when every worker has the same degree.
      if (!topology.is_regular())
        throw std::invalid_argument("uniform-neighbor weights need a regular topology (" +
                                    std::string(to_string(topology.kind())) + " is not)");
      for (Index i = 0; i < n; ++i) {
        const auto degree = static_cast<double>(topology.degree(i));
        double self = 1.0 / (degree + 1.0);
        double other = self;
        if (self_weight) {
          if (*self_weight < 0.0 || *self_weight > 1.0)
            throw std::invalid_argument("self weight must lie in [0, 1]");
          self = degree == 0.0 ? 1.0 : *self_weight;
          other = degree == 0.0 ? 0.0 : (1.0 - *self_weight) / degree;
        }
        w(i, i) = self;
        for (Index j : topology.neighbors(i)) w(i, j) = other;
      }
      if (self_weight) label += "(self=" + format_number(*self_weight) + ")";
      break;
    }
    case MixingScheme::lazy_metropolis: {
      for (const auto& [a, b] : topology.edges()) {
        const double weight =
            1.0 / (1.0 + static_cast<double>(std::max(topology.degree(a), topology.degree(b))));
        w(a, b) = weight;
        w(b, a) = weight;
      }
      for (Index i = 0; i < n; ++i) w(i, i) = 1.0 - (w.row(i).sum() - w(i, i));
      w = (w + Matrix::Identity(n, n)) / 2.0;
      break;
    }
    case MixingScheme::mean_all: {
      const auto full = static_cast<std::size_t>(n * (n - 1) / 2);
      if (topology.edges().size() != full)
        throw std::invalid_argument("mean-all mixing needs a complete topology");
      w.setConstant(1.0 / static_cast<double>(n));
      break;
    }
  }
  return MixingMatrix(topology, std::move(w), std::move(label));
}

bool ValidationReport::valid() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::string ValidationReport::reasons() const {
  std::string out;
  for (const auto& c : checks) {
    if (c.passed) continue;
    if (!out.empty()) out += "; ";
    out += c.detail;
  }
  return out;
}

ValidationReport validate(const Matrix& weights) {
  ValidationReport report;
  const Index n = weights.rows();
  if (n == 0 || weights.cols() != n) {
    report.checks.push_back({"square", false, "matrix is not square"});
    return report;
  }

  const double asymmetry = (weights - weights.transpose()).cwiseAbs().maxCoeff();
  const bool symmetric = asymmetry <= 1e-12;
  report.checks.push_back({"symmetric", symmetric, "max |W_ij - W_ji| = " + format_number(asymmetry)});

  const double row_error = (weights.rowwise().sum().array() - 1.0).abs().maxCoeff();
  report.checks.push_back({"row_sums_one", row_error <= kStochasticTolerance,
                           "max |sum_j W_ij - 1| = " + format_number(row_error)});

  if (!symmetric) {
    report.checks.push_back({"lambda_below_one", false, "spectrum not computed for asymmetric W"});
    report.checks.push_back({"lambda_n_above_floor", false, "spectrum not computed for asymmetric W"});
    return report;
  }

  const auto eig = symmetric_eigen(weights, JacobiOptions{1e-12, 1e-12, 100});
  report.lambda = n > 1 ? eig.eigenvalues(1) : 0.0;
  report.lambda_n = eig.eigenvalues(n - 1);
  // A disconnected W has lambda_2 = 1 up to rounding, hence the margin.
  const bool gap = report.lambda < 1.0 - kStochasticTolerance;
  report.checks.push_back({"lambda_below_one", gap,
                           gap ? "lambda = " + format_number(report.lambda) + " < 1"
                               : "lambda = " + format_number(report.lambda) + " >= 1"});
  const bool floor = report.lambda_n > kLambdaNFloor + kEigenvalueTolerance;
  report.checks.push_back({"lambda_n_above_floor", floor,
                           floor ? "lambda_n = " + format_number(report.lambda_n) + " > -1/3"
                                 : "lambda_n = " + format_number(report.lambda_n) + " <= -1/3"});
  return report;
}

ValidationReport validate(const MixingMatrix& w) { return validate(w.weights()); }

double negative_mode_modulus(double lambda_n) {
  if (lambda_n >= -kEigenvalueTolerance) return 0.0;
  return std::sqrt(lambda_n * lambda_n - lambda_n) - lambda_n;
}

std::pair<double, double> spectral_constants(double lambda, double lambda_n) {
  // Positive-eigenvalue branch; lambda <= 0 leaves no positive disagreement mode.
  const double lp = lambda > kEigenvalueTolerance ? lambda : 0.0;
  double c1 = 1.0 / ((1.0 - lp) * (1.0 - lp));
  const double root = 1.0 - std::sqrt(lp);
  double c2 = lp * lp / (root * root * (1.0 - lp));
  if (lambda_n < -kEigenvalueTolerance) {
    const double modulus = negative_mode_modulus(lambda_n);
    const double damping = 1.0 - modulus * modulus;
    c1 = std::max(c1, 1.0 / damping);
    c2 = std::max(c2, lambda_n * lambda_n / damping);
  }
  return {c1, c2};
}

TheoryConstants theory_constants(const MixingMatrix& w, double L, double gamma) {
  if (!(L > 0.0)) throw std::invalid_argument("theory_constants: L must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("theory_constants: gamma must be positive");
  const auto report = validate(w);
  if (!report.valid())
    throw std::invalid_argument("theory_constants: invalid mixing matrix: " + report.reasons());

  TheoryConstants k;
  k.lambda = w.lambda();
  k.lambda_n = w.lambda_n();
  if (k.lambda_n < -kEigenvalueTolerance) k.v = k.lambda_n - std::sqrt(k.lambda_n * k.lambda_n - k.lambda_n);
  std::tie(k.C1, k.C2) = spectral_constants(k.lambda, k.lambda_n);
  k.gamma = gamma;
  k.L = L;
  const double g2l2 = gamma * gamma * L * L;
  k.C3 = 1.0 - 24.0 * k.C2 * g2l2;
  if (!(k.C3 > 0.0))
    throw std::invalid_argument("stepsize violates precondition 1 - 24*C2*gamma^2*L^2 > 0 (C3 = " +
                                format_number(k.C3) + ")");
  k.A1 = 1.0 - 6.0 * L * L * k.C1 * gamma * gamma / k.C3;
  k.A2 = 1.0 - L * gamma - 6.0 * L * L * k.C2 * g2l2 * gamma * gamma / k.C3;
  return k;
}

double recommended_stepsize(double C1, double C2, double L, double sigma, Index T, Index n) {
  if (!(C1 >= 1.0) || !(C2 >= 0.0) || !(L > 0.0) || !(sigma >= 0.0) || T < 1 || n < 1)
    throw std::invalid_argument("recommended_stepsize: need C1>=1, C2>=0, L>0, sigma>=0, T>=1, n>=1");
  const double noise = sigma * std::sqrt(static_cast<double>(T) / static_cast<double>(n));
  return 1.0 / (8.0 * std::sqrt(C2) * L + 6.0 * std::sqrt(C1) * L + noise);
}

}  // namespace d2sim
