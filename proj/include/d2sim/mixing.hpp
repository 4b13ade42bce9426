#ifndef D2SIM_MIXING_HPP_
#define D2SIM_MIXING_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d2sim/jacobi.hpp"
#include "d2sim/types.hpp"

namespace d2sim {

enum class TopologyKind { ring, complete, star, custom };

std::string_view to_string(TopologyKind kind);
TopologyKind parse_topology_kind(std::string_view name);

/// Undirected worker graph. Edges are stored once with first < second.
class Topology {
 public:
  using Edge = std::pair<Index, Index>;

  /// Builds a custom topology; throws if the graph is disconnected, has a
  /// self loop, or references a worker outside [0, n).
  Topology(Index n, std::vector<Edge> edges, TopologyKind kind = TopologyKind::custom);

  Index size() const noexcept { return n_; }
  TopologyKind kind() const noexcept { return kind_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<Index>& neighbors(Index worker) const { return adjacency_.at(static_cast<std::size_t>(worker)); }
  Index degree(Index worker) const { return static_cast<Index>(neighbors(worker).size()); }
  bool connected(Index i, Index j) const;
  bool is_regular() const;

 private:
  Index n_;
  TopologyKind kind_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Index>> adjacency_;
};

Topology build_topology(TopologyKind kind, Index n);

enum class MixingScheme { uniform_neighbor, lazy_metropolis, mean_all };

std::string_view to_string(MixingScheme scheme);
MixingScheme parse_mixing_scheme(std::string_view name);

/// Symmetric doubly stochastic confusion matrix with its eigendecomposition.
class MixingMatrix {
 public:
  /// Checks symmetry, unit row sums and the sparsity pattern of `topology`,
  /// then eigendecomposes. Throws std::logic_error if any check fails.
  MixingMatrix(const Topology& topology, Matrix weights, std::string kind_label);

  Index size() const noexcept { return weights_.rows(); }
  const Matrix& weights() const noexcept { return weights_; }
  const Vector& eigenvalues() const noexcept { return eigen_.eigenvalues; }
  const Matrix& eigenvectors() const noexcept { return eigen_.eigenvectors; }
  const std::string& kind() const noexcept { return kind_; }

  /// lambda := lambda_2, the largest eigenvalue after the leading one.
  /// For n = 1 there is no second eigenvalue and 0 is returned.
  double lambda() const;
  double lambda_n() const { return eigen_.eigenvalues(size() - 1); }
  double spectral_gap() const { return 1.0 - lambda(); }

 private:
  Matrix weights_;
  SymmetricEigen<double> eigen_;
  std::string kind_;
};

/// `self_weight` overrides the uniform-neighbor diagonal; neighbours then
/// share 1 - self_weight equally. Only meaningful for uniform_neighbor.
MixingMatrix build_mixing_matrix(const Topology& topology, MixingScheme scheme,
                                 std::optional<double> self_weight = std::nullopt);

struct ValidationCheck {
  std::string name;
  bool passed;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  double lambda = 0.0;
  double lambda_n = 0.0;

  bool valid() const;
  /// Details of the failed checks joined with "; ".
  std::string reasons() const;
};

inline constexpr double kStochasticTolerance = 1e-10;
inline constexpr double kLambdaNFloor = -1.0 / 3.0;
/// Eigenvalues within this distance of 0 or of the floor are treated as
/// lying on it.
inline constexpr double kEigenvalueTolerance = 1e-12;

/// Symmetry, W1 = 1, lambda_2 < 1 and lambda_n > -1/3, each reported
/// separately. Works on any square matrix, decomposed or not.
ValidationReport validate(const Matrix& weights);
ValidationReport validate(const MixingMatrix& w);

struct TheoryConstants {
  double lambda = 0.0;
  double lambda_n = 0.0;
  /// lambda_n - sqrt(lambda_n^2 - lambda_n); only defined for lambda_n < 0.
  std::optional<double> v;
  double C1 = 1.0;
  double C2 = 0.0;
  double C3 = 1.0;
  double A1 = 1.0;
  double A2 = 1.0;
  double gamma = 0.0;
  double L = 0.0;
};

/// Contraction factor |v| of the negative-eigenvalue mode; 0 when
/// lambda_n >= 0.
double negative_mode_modulus(double lambda_n);

/// Throws std::invalid_argument when W fails validation or when
/// 1 - 24 C2 gamma^2 L^2 <= 0.
TheoryConstants theory_constants(const MixingMatrix& w, double L, double gamma);

/// C1, C2 alone; they depend only on the spectrum.
std::pair<double, double> spectral_constants(double lambda, double lambda_n);

double recommended_stepsize(double C1, double C2, double L, double sigma, Index T, Index n);

}  // namespace d2sim

#endif  // D2SIM_MIXING_HPP_
