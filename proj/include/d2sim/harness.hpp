#ifndef D2SIM_HARNESS_HPP_
#define D2SIM_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "d2sim/mixing.hpp"
#include "d2sim/optimizers.hpp"
#include "d2sim/problems.hpp"

namespace d2sim {

/// Config problem with the JSON path of the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  /// Algorithms to run; "all" in JSON expands to {d2, dpsgd, cpsgd}.
  std::vector<Algorithm> algorithms{Algorithm::d2};
  TopologyKind topology = TopologyKind::ring;
  Index topology_n = 5;
  MixingScheme mixing_scheme = MixingScheme::uniform_neighbor;
  ProblemParams problem;
  /// Empty means "auto": the stepsize recommended for the run's constants.
  std::optional<double> gamma;
  Index T = 100;
  BatchSpec batch;
  Index log_every = 1;
  std::uint64_t seed = 0;
  std::string out;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses the JSON config text. Unknown keys, missing required keys and
/// semantic errors raise ConfigError naming the field.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

std::vector<std::string> preset_names();
ExperimentConfig preset(std::string_view name);

struct ExperimentResult {
  ExperimentConfig config;
  double gamma = 0.0;  // resolved stepsize
  double smoothness = 0.0;
  VarianceEstimates variances;
  std::optional<TheoryConstants> constants;
  std::vector<Trajectory> trajectories;
  std::vector<std::string> warnings;
};

/// Probe points used for the sigma estimate behind "auto" stepsizes.
std::vector<Vector> variance_probes(const ProblemInstance& problem, std::uint64_t seed);

/// Builds topology, W, problem; validates; resolves gamma; runs every
/// requested algorithm on identical sample streams. Writes the CSV when
/// `config.out` is non-empty.
ExperimentResult run_experiment(const ExperimentConfig& config);

inline constexpr std::string_view kCsvHeader =
    "iter,algo,loss,grad_norm_sq_mean,grad_norm_sq_avg,consensus_err,gamma,seed";

void write_csv(std::ostream& os, const std::vector<Trajectory>& trajectories);
void write_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories);
std::string csv_string(const std::vector<Trajectory>& trajectories);

struct ComparisonEntry {
  Algorithm algorithm;
  MetricSummary summary;
  double loss_ratio = 1.0;       // final loss / reference final loss
  double grad_norm_ratio = 1.0;  // final grad_norm_sq_mean / reference
  std::vector<std::string> warnings;
};

struct ComparisonReport {
  std::vector<ComparisonEntry> entries;  // entries[0] is the reference
  std::vector<std::string> warnings;
};

/// Needs at least two trajectories over the same problem.
ComparisonReport compare_report(const std::vector<Trajectory>& trajectories);
std::string to_text(const ComparisonReport& report);
std::string to_json(const ComparisonReport& report);

/// {"n", "kind", "weights" (row-major), "eigenvalues"}.
std::string mixing_to_json(const MixingMatrix& w);
/// {"kind", "n", "dim", "seed", "params"}; instances are regenerated from it.
std::string problem_to_json(const ProblemParams& params);
ProblemParams problem_from_json(std::string_view text);

struct LemmaCheckLine {
  std::string name;
  bool passed;
  double residual;
  std::string detail;
};

/// Runs the seeded oracle sweeps behind `d2sim lemma-check`.
std::vector<LemmaCheckLine> lemma_check(std::uint64_t seed);

}  // namespace d2sim

#endif  // D2SIM_HARNESS_HPP_
