#include "d2sim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "d2sim/lemma_oracles.hpp"

namespace d2sim {

using nlohmann::json;

namespace {

std::string format_double(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

void reject_unknown_keys(const json& object, const std::set<std::string>& allowed,
                         const std::string& prefix) {
  for (const auto& [key, value] : object.items()) {
    if (!allowed.count(key)) throw ConfigError(prefix + key, "unknown key '" + key + "'");
  }
}

const json& require_key(const json& object, const std::string& key, const std::string& prefix) {
  if (!object.contains(key)) throw ConfigError(prefix + key, "missing required key");
  return object.at(key);
}

template <typename T>
T read_as(const json& value, const std::string& field) {
  try {
    return value.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, std::string("wrong type: ") + e.what());
  }
}

Index read_count(const json& value, const std::string& field, Index minimum) {
  if (!value.is_number_integer()) throw ConfigError(field, "expected an integer");
  const auto v = value.get<std::int64_t>();
  if (v < minimum) throw ConfigError(field, "must be >= " + std::to_string(minimum));
  return static_cast<Index>(v);
}

std::string algorithms_label(const std::vector<Algorithm>& algorithms) {
  if (algorithms.size() == 3) return "all";
  return std::string(to_string(algorithms.front()));
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("", "config must be a JSON object");
  reject_unknown_keys(root,
                      {"algorithm", "topology", "mixing_scheme", "problem", "gamma", "T",
                       "batch_size", "log_every", "seed", "out"},
                      "");

  ExperimentConfig c;

  const auto algorithm = read_as<std::string>(require_key(root, "algorithm", ""), "algorithm");
  if (algorithm == "all") {
    c.algorithms = {Algorithm::d2, Algorithm::dpsgd, Algorithm::cpsgd};
  } else {
    try {
      c.algorithms = {parse_algorithm(algorithm)};
    } catch (const std::invalid_argument& e) {
      throw ConfigError("algorithm", e.what());
    }
  }

  const json& topology = require_key(root, "topology", "");
  if (!topology.is_object()) throw ConfigError("topology", "expected an object");
  reject_unknown_keys(topology, {"kind", "n"}, "topology.");
  try {
    c.topology = parse_topology_kind(
        read_as<std::string>(require_key(topology, "kind", "topology."), "topology.kind"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("topology.kind", e.what());
  }
  c.topology_n = read_count(require_key(topology, "n", "topology."), "topology.n", 1);
  if (c.topology == TopologyKind::custom)
    throw ConfigError("topology.kind", "custom topologies cannot be described in a config");
  try {
    (void)build_topology(c.topology, c.topology_n);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("topology.n", e.what());
  }

  if (root.contains("mixing_scheme")) {
    try {
      c.mixing_scheme = parse_mixing_scheme(read_as<std::string>(root["mixing_scheme"], "mixing_scheme"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("mixing_scheme", e.what());
    }
  }

  const json& problem = require_key(root, "problem", "");
  if (!problem.is_object()) throw ConfigError("problem", "expected an object");
  reject_unknown_keys(problem,
                      {"kind", "dim", "n_workers", "samples_per_worker", "heterogeneity", "noise",
                       "classes", "shuffled", "seed"},
                      "problem.");
  ProblemParams& p = c.problem;
  try {
    p.kind = parse_objective_kind(read_as<std::string>(require_key(problem, "kind", "problem."), "problem.kind"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("problem.kind", e.what());
  }
  p.features = read_count(require_key(problem, "dim", "problem."), "problem.dim", 1);
  p.n_workers = problem.contains("n_workers")
                    ? read_count(problem["n_workers"], "problem.n_workers", 1)
                    : c.topology_n;
  if (p.n_workers != c.topology_n)
    throw ConfigError("problem.n_workers", "must equal topology.n (" + std::to_string(c.topology_n) + ")");
  p.samples_per_worker = problem.contains("samples_per_worker")
                             ? read_count(problem["samples_per_worker"], "problem.samples_per_worker", 1)
                             : 10;
  p.heterogeneity = problem.contains("heterogeneity")
                        ? read_as<double>(problem["heterogeneity"], "problem.heterogeneity")
                        : 0.0;
  if (p.heterogeneity < 0.0) throw ConfigError("problem.heterogeneity", "must be >= 0");
  const bool logistic = p.kind == ObjectiveKind::logistic_regression;
  p.noise = problem.contains("noise") ? read_as<double>(problem["noise"], "problem.noise") : (logistic ? 1.0 : 0.0);
  if (p.noise < 0.0) throw ConfigError("problem.noise", "must be >= 0");
  p.classes = problem.contains("classes") ? read_count(problem["classes"], "problem.classes", 2)
                                          : (logistic ? 2 : 0);
  if (!logistic) p.classes = 0;
  p.shuffled = problem.contains("shuffled") ? read_as<bool>(problem["shuffled"], "problem.shuffled") : false;
  p.seed = problem.contains("seed") ? read_as<std::uint64_t>(problem["seed"], "problem.seed") : 0;
  if (logistic) {
    const Index total = p.n_workers * p.samples_per_worker;
    if (total % p.classes != 0)
      throw ConfigError("problem.classes", "n_workers * samples_per_worker must be a multiple of classes");
    if (!p.shuffled && p.classes % p.n_workers != 0)
      throw ConfigError("problem.classes", "unshuffled partitions need classes divisible by n_workers");
  }

  const json& gamma = require_key(root, "gamma", "");
  if (gamma.is_string()) {
    if (gamma.get<std::string>() != "auto") throw ConfigError("gamma", "expected a number or \"auto\"");
    c.gamma.reset();
  } else {
    c.gamma = read_as<double>(gamma, "gamma");
    if (!(*c.gamma > 0.0)) throw ConfigError("gamma", "must be positive");
  }

  c.T = read_count(require_key(root, "T", ""), "T", 1);

  if (root.contains("batch_size")) {
    const json& batch = root["batch_size"];
    if (batch.is_string()) {
      if (batch.get<std::string>() != "full") throw ConfigError("batch_size", "expected an integer or \"full\"");
      c.batch = {Sampling::full_batch, 0};
    } else {
      c.batch = {Sampling::with_replacement, read_count(batch, "batch_size", 1)};
    }
  }
  if (c.batch.sampling == Sampling::with_replacement) {
    if (c.batch.size > p.samples_per_worker)
      throw ConfigError("batch_size", "exceeds the shard size " + std::to_string(p.samples_per_worker));
  }

  if (root.contains("log_every")) c.log_every = read_count(root["log_every"], "log_every", 1);
  if (root.contains("seed")) c.seed = read_as<std::uint64_t>(root["seed"], "seed");
  if (root.contains("out")) c.out = read_as<std::string>(root["out"], "out");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json root;
  root["algorithm"] = algorithms_label(c.algorithms);
  root["topology"] = {{"kind", std::string(to_string(c.topology))}, {"n", c.topology_n}};
  root["mixing_scheme"] = std::string(to_string(c.mixing_scheme));
  json problem = {{"kind", std::string(to_string(c.problem.kind))},
                  {"dim", c.problem.features},
                  {"n_workers", c.problem.n_workers},
                  {"samples_per_worker", c.problem.samples_per_worker},
                  {"heterogeneity", c.problem.heterogeneity},
                  {"noise", c.problem.noise},
                  {"shuffled", c.problem.shuffled},
                  {"seed", c.problem.seed}};
  if (c.problem.kind == ObjectiveKind::logistic_regression) problem["classes"] = c.problem.classes;
  root["problem"] = problem;
  if (c.gamma)
    root["gamma"] = *c.gamma;
  else
    root["gamma"] = "auto";
  root["T"] = c.T;
  if (c.batch.sampling == Sampling::full_batch)
    root["batch_size"] = "full";
  else
    root["batch_size"] = c.batch.size;
  root["log_every"] = c.log_every;
  root["seed"] = c.seed;
  root["out"] = c.out;
  return root.dump(2);
}

std::vector<std::string> preset_names() {
  return {"unshuffled-ring", "shuffled-ring", "deterministic-quadratic"};
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  c.algorithms = {Algorithm::d2, Algorithm::dpsgd, Algorithm::cpsgd};
  c.topology = TopologyKind::ring;
  c.topology_n = 5;
  c.mixing_scheme = MixingScheme::uniform_neighbor;
  c.seed = 20240501;
  if (name == "deterministic-quadratic") {
    c.problem.kind = ObjectiveKind::least_squares;
    c.problem.n_workers = 5;
    c.problem.features = 10;
    c.problem.samples_per_worker = 40;
    c.problem.heterogeneity = 1.0;
    c.problem.noise = 0.0;
    c.problem.classes = 0;
    c.problem.seed = 7;
    c.gamma = 0.1;
    c.T = 5000;
    c.batch = {Sampling::full_batch, 0};
    c.log_every = 10;
    c.out = "deterministic-quadratic.csv";
    return c;
  }
  if (name == "unshuffled-ring" || name == "shuffled-ring") {
    c.problem.kind = ObjectiveKind::logistic_regression;
    c.problem.n_workers = 5;
    c.problem.features = 8;
    c.problem.classes = 10;
    c.problem.samples_per_worker = 200;
    c.problem.noise = 1.0;
    c.problem.shuffled = name == "shuffled-ring";
    c.problem.seed = 11;
    c.gamma = 0.2;
    c.T = 2000;
    c.batch = {Sampling::with_replacement, 200};
    c.log_every = 10;
    c.out = std::string(name) + ".csv";
    return c;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

std::vector<Vector> variance_probes(const ProblemInstance& problem, std::uint64_t seed) {
  std::vector<Vector> probes{Vector::Zero(problem.dim())};
  std::mt19937_64 gen(mix64(seed ^ 0x5eedULL));
  std::normal_distribution<double> normal;
  Vector x(problem.dim());
  for (Index k = 0; k < x.size(); ++k) x(k) = normal(gen);
  probes.push_back(std::move(x));
  return probes;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result;
  result.config = config;
  if (config.problem.n_workers != config.topology_n)
    throw ConfigError("problem.n_workers", "must equal topology.n");

  const Topology topology = build_topology(config.topology, config.topology_n);
  const MixingMatrix w = build_mixing_matrix(topology, config.mixing_scheme);
  const bool decentralized =
      std::any_of(config.algorithms.begin(), config.algorithms.end(),
                  [](Algorithm a) { return a != Algorithm::cpsgd; });
  const ValidationReport report = validate(w);
  if (decentralized && !report.valid())
    throw std::invalid_argument("mixing matrix rejected: " + report.reasons());

  const ProblemInstance problem = make_problem(config.problem);
  result.smoothness = problem.smoothness();
  result.variances = estimate_variances(problem, variance_probes(problem, config.seed), 256, config.seed);

  if (config.gamma) {
    result.gamma = *config.gamma;
  } else {
    if (!report.valid())
      throw std::invalid_argument("gamma \"auto\" needs a valid mixing matrix: " + report.reasons());
    const auto [c1, c2] = spectral_constants(w.lambda(), w.lambda_n());
    // Standard deviation of one minibatch gradient.
    double sigma = 0.0;
    if (config.batch.sampling == Sampling::with_replacement)
      sigma = std::sqrt(result.variances.sigma_sq / static_cast<double>(config.batch.size));
    result.gamma = recommended_stepsize(c1, c2, problem.smoothness(), sigma, config.T, problem.workers());
  }

  if (report.valid()) {
    try {
      result.constants = theory_constants(w, problem.smoothness(), result.gamma);
    } catch (const std::invalid_argument& e) {
      result.warnings.emplace_back(e.what());
    }
  }

  RunOptions options;
  options.log_every = config.log_every;
  std::vector<std::future<Trajectory>> jobs;
  for (Algorithm algorithm : config.algorithms) {
    jobs.push_back(std::async(std::launch::async, [&, algorithm] {
      return run(algorithm, problem, w, result.gamma, config.T, config.batch, config.seed, options);
    }));
  }
  for (auto& job : jobs) {
    result.trajectories.push_back(job.get());
    for (const auto& warning : result.trajectories.back().warnings)
      if (std::find(result.warnings.begin(), result.warnings.end(), warning) == result.warnings.end())
        result.warnings.push_back(warning);
  }

  if (!config.out.empty()) write_csv(config.out, result.trajectories);
  return result;
}

void write_csv(std::ostream& os, const std::vector<Trajectory>& trajectories) {
  os << kCsvHeader << '\n';
  for (const auto& trajectory : trajectories) {
    const std::string algo(to_string(trajectory.algorithm));
    const std::string gamma = format_double(trajectory.gamma);
    for (const auto& r : trajectory.records) {
      os << r.t << ',' << algo << ',' << format_double(r.loss_mean_model) << ','
         << format_double(r.grad_norm_sq_mean_model) << ',' << format_double(r.grad_norm_sq_avg) << ','
         << format_double(r.consensus_err) << ',' << gamma << ',' << trajectory.seed << '\n';
    }
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_csv(out, trajectories);
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string csv_string(const std::vector<Trajectory>& trajectories) {
  std::ostringstream os;
  write_csv(os, trajectories);
  return os.str();
}

namespace {

double ratio(double value, double reference) {
  if (value == reference) return 1.0;
  if (reference == 0.0) return std::numeric_limits<double>::infinity();
  return value / reference;
}

}  // namespace

ComparisonReport compare_report(const std::vector<Trajectory>& trajectories) {
  if (trajectories.size() < 2) throw std::invalid_argument("compare_report: need at least two trajectories");
  for (const auto& t : trajectories) {
    if (t.records.empty()) throw std::invalid_argument("compare_report: empty trajectory");
    if (!(t.problem == trajectories.front().problem))
      throw std::invalid_argument("compare_report: trajectories were run on different problems");
  }
  ComparisonReport report;
  const MetricSummary reference = summarize(trajectories.front().records);
  for (const auto& t : trajectories) {
    ComparisonEntry e{t.algorithm, summarize(t.records), 1.0, 1.0, t.warnings};
    e.loss_ratio = ratio(e.summary.final.loss_mean_model, reference.final.loss_mean_model);
    e.grad_norm_ratio =
        ratio(e.summary.final.grad_norm_sq_mean_model, reference.final.grad_norm_sq_mean_model);
    for (const auto& w : t.warnings)
      report.warnings.push_back(std::string(to_string(t.algorithm)) + ": " + w);
    report.entries.push_back(std::move(e));
  }
  return report;
}

std::string to_text(const ComparisonReport& report) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %14s %14s %14s %14s %10s %10s\n", "algo", "final_loss",
                "final_grad_sq", "min_grad_sq", "consensus", "loss_x", "grad_x");
  os << line;
  for (const auto& e : report.entries) {
    std::snprintf(line, sizeof line, "%-6s %14.6e %14.6e %14.6e %14.6e %10.4g %10.4g\n",
                  std::string(to_string(e.algorithm)).c_str(), e.summary.final.loss_mean_model,
                  e.summary.final.grad_norm_sq_mean_model, e.summary.min_grad_norm_sq_mean_model,
                  e.summary.final.consensus_err, e.loss_ratio, e.grad_norm_ratio);
    os << line;
  }
  for (const auto& w : report.warnings) os << "warning: " << w << '\n';
  return os.str();
}

std::string to_json(const ComparisonReport& report) {
  json root;
  root["entries"] = json::array();
  for (const auto& e : report.entries) {
    root["entries"].push_back({{"algo", std::string(to_string(e.algorithm))},
                               {"final_loss", e.summary.final.loss_mean_model},
                               {"final_grad_norm_sq_mean", e.summary.final.grad_norm_sq_mean_model},
                               {"final_grad_norm_sq_avg", e.summary.final.grad_norm_sq_avg},
                               {"final_consensus_err", e.summary.final.consensus_err},
                               {"mean_grad_norm_sq_mean", e.summary.running_mean.grad_norm_sq_mean_model},
                               {"min_grad_norm_sq_mean", e.summary.min_grad_norm_sq_mean_model},
                               {"loss_ratio", e.loss_ratio},
                               {"grad_norm_ratio", e.grad_norm_ratio}});
  }
  root["warnings"] = report.warnings;
  return root.dump(2);
}

std::string mixing_to_json(const MixingMatrix& w) {
  json root;
  root["n"] = w.size();
  root["kind"] = w.kind();
  json rows = json::array();
  for (Index i = 0; i < w.size(); ++i) {
    json row = json::array();
    for (Index j = 0; j < w.size(); ++j) row.push_back(w.weights()(i, j));
    rows.push_back(std::move(row));
  }
  root["weights"] = std::move(rows);
  root["eigenvalues"] = std::vector<double>(w.eigenvalues().data(), w.eigenvalues().data() + w.size());
  return root.dump();
}

std::string problem_to_json(const ProblemParams& p) {
  json root;
  root["kind"] = std::string(to_string(p.kind));
  root["n"] = p.n_workers;
  root["dim"] = p.features;
  root["seed"] = p.seed;
  root["params"] = {{"samples_per_worker", p.samples_per_worker},
                    {"heterogeneity", p.heterogeneity},
                    {"noise", p.noise},
                    {"classes", p.classes},
                    {"shuffled", p.shuffled}};
  return root.dump();
}

ProblemParams problem_from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  reject_unknown_keys(root, {"kind", "n", "dim", "seed", "params"}, "");
  ProblemParams p;
  try {
    p.kind = parse_objective_kind(read_as<std::string>(require_key(root, "kind", ""), "kind"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("kind", e.what());
  }
  p.n_workers = read_count(require_key(root, "n", ""), "n", 1);
  p.features = read_count(require_key(root, "dim", ""), "dim", 1);
  p.seed = read_as<std::uint64_t>(require_key(root, "seed", ""), "seed");
  const json& params = require_key(root, "params", "");
  reject_unknown_keys(params, {"samples_per_worker", "heterogeneity", "noise", "classes", "shuffled"}, "params.");
  p.samples_per_worker = read_count(require_key(params, "samples_per_worker", "params."), "params.samples_per_worker", 1);
  p.heterogeneity = read_as<double>(require_key(params, "heterogeneity", "params."), "params.heterogeneity");
  p.noise = read_as<double>(require_key(params, "noise", "params."), "params.noise");
  p.classes = read_count(require_key(params, "classes", "params."), "params.classes", 0);
  p.shuffled = read_as<bool>(require_key(params, "shuffled", "params."), "params.shuffled");
  return p;
}

std::vector<LemmaCheckLine> lemma_check(std::uint64_t seed) {
  std::vector<LemmaCheckLine> lines;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  {
    double worst = 0.0;
    double largest = 0.0;
    for (int k = 0; k < 50; ++k) {
      RecurrenceSpec<double> spec;
      spec.rho = k % 2 == 0 ? std::uniform_real_distribution<double>(-0.33, -0.01)(gen)
                            : std::uniform_real_distribution<double>(0.01, 0.95)(gen);
      spec.a1 = unit(gen);
      spec.horizon = 200;
      for (int s = 0; s < 199; ++s) spec.beta.push_back(unit(gen));
      const auto direct = recurrence_direct(spec);
      const auto closed = recurrence_closed_form(spec);
      for (std::size_t t = 0; t < direct.size(); ++t) {
        worst = std::max(worst, std::abs(direct[t] - closed[t]));
        largest = std::max(largest, std::abs(direct[t]));
      }
    }
    lines.push_back({"recurrence_closed_form", worst <= 1e-10, worst,
                     "50 specs, horizon 200, max |a_t| = " + format_double(largest)});
  }

  {
    int failures = 0;
    double tightest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 100; ++k) {
      const double rho = std::uniform_real_distribution<double>(0.0, 0.99)(gen);
      const auto length = std::uniform_int_distribution<int>(1, 60)(gen);
      std::vector<double> b;
      for (int s = 0; s < length; ++s) b.push_back(std::uniform_real_distribution<double>(0.0, 2.0)(gen));
      const auto r = geometric_sum_bounds(rho, b, static_cast<Index>(b.size()));
      if (!r.holds) ++failures;
      tightest = std::min({tightest, r.S_bound - r.S, r.D_bound - r.D});
    }
    lines.push_back({"geometric_sum_bounds", failures == 0, tightest,
                     std::to_string(failures) + " of 100 specs violated"});
  }

  {
    double worst = 0.0;
    bool tail_ok = true;
    for (Index n = 3; n <= 12; ++n) {
      const auto w = build_mixing_matrix(build_topology(TopologyKind::ring, n), MixingScheme::uniform_neighbor);
      Matrix x(7, n);
      for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < n; ++j) x(i, j) = unit(gen);
      const auto r = rotation_invariance_check(x, w.eigenvectors());
      worst = std::max(worst, r.max_residual);
      tail_ok = tail_ok && r.tail_sq <= r.norm_sq + 1e-8;
    }
    lines.push_back({"rotation_invariance", worst <= 1e-8 && tail_ok, worst, "ring n = 3..12, random X"});
  }

  {
    RecurrenceSpec<double> inside{-0.32, 1.0, {}, 200};
    RecurrenceSpec<double> outside{-0.34, 1.0, {}, 200};
    const double decay = std::abs(recurrence_direct(inside).back());
    const double growth = std::abs(recurrence_direct(outside).back());
    lines.push_back({"negative_rho_threshold", decay < 1.0 && growth > 1.0, growth,
                     "|a_200| at rho=-0.32: " + format_double(decay) + ", at rho=-0.34: " + format_double(growth)});
  }

  {
    double previous = 0.0;
    bool increasing = true;
    for (double lambda_n : {-0.2, -0.3, -0.33, -0.333, -0.3333}) {
      const double c1 = spectral_constants(0.5, lambda_n).first;
      increasing = increasing && c1 > previous;
      previous = c1;
    }
    lines.push_back({"c1_blowup_near_floor", increasing, previous, "C1 at lambda_n = -0.3333"});
  }
  return lines;
}

}  // namespace d2sim
