// d2sim: command-line driver for the decentralized optimization simulator.
//
//   d2sim run --config <path> [--out <path>]
//   d2sim spectrum --topology <kind> --n <int> --scheme <name>
//   d2sim lemma-check [--seed <u64>]
//   d2sim preset <name> --out <path>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "d2sim/harness.hpp"

namespace {

using namespace d2sim;

int run_command(const std::string& config_path, const std::string& out_override, const std::string& report_path) {
  ExperimentConfig config = load_config(config_path);
  if (!out_override.empty()) config.out = out_override;
  const ExperimentResult result = run_experiment(config);

  std::cout << "gamma=" << result.gamma << '\n'
            << "L=" << result.smoothness << '\n'
            << "sigma_sq=" << result.variances.sigma_sq << '\n'
            << "zeta0=" << result.variances.zeta0 << '\n';
  if (result.constants) {
    std::cout << "C1=" << result.constants->C1 << '\n'
              << "C2=" << result.constants->C2 << '\n'
              << "C3=" << result.constants->C3 << '\n';
  }
  if (result.trajectories.size() >= 2) {
    const auto report = compare_report(result.trajectories);
    std::cout << to_text(report);
    if (!report_path.empty()) {
      std::ofstream out(report_path);
      if (!out) throw std::runtime_error("cannot open '" + report_path + "' for writing");
      out << to_json(report) << '\n';
    }
  } else {
    const auto summary = summarize(result.trajectories.front().records);
    std::cout << "final_loss=" << summary.final.loss_mean_model << '\n'
              << "final_grad_norm_sq_mean=" << summary.final.grad_norm_sq_mean_model << '\n';
    for (const auto& w : result.warnings) std::cout << "warning: " << w << '\n';
  }
  if (!config.out.empty()) std::cout << "csv=" << config.out << '\n';
  return 0;
}

int spectrum_command(const std::string& kind, Index n, const std::string& scheme,
                     std::optional<double> self_weight, const std::string& json_path,
                     double L, double gamma) {
  const Topology topology = build_topology(parse_topology_kind(kind), n);
  const MixingMatrix w = build_mixing_matrix(topology, parse_mixing_scheme(scheme), self_weight);
  const ValidationReport report = validate(w);

  std::printf("n=%lld\n", static_cast<long long>(n));
  std::printf("kind=%s\n", kind.c_str());
  std::printf("scheme=%s\n", w.kind().c_str());
  for (const auto& check : report.checks)
    std::printf("%s=%s\n", check.name.c_str(), check.passed ? "pass" : "fail");
  std::printf("lambda=%.17g\n", report.lambda);
  std::printf("lambda_n=%.17g\n", report.lambda_n);
  std::printf("spectral_gap=%.17g\n", 1.0 - report.lambda);
  std::string eigenvalues;
  for (Index k = 0; k < w.size(); ++k) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%s%.17g", k ? "," : "", w.eigenvalues()(k));
    eigenvalues += buffer;
  }
  std::printf("eigenvalues=%s\n", eigenvalues.c_str());
  std::printf("valid=%s\n", report.valid() ? "true" : "false");
  if (!report.valid()) std::printf("reason=%s\n", report.reasons().c_str());
  if (report.valid()) {
    const auto [c1, c2] = spectral_constants(report.lambda, report.lambda_n);
    std::printf("C1=%.17g\n", c1);
    std::printf("C2=%.17g\n", c2);
    if (gamma > 0.0) {
      try {
        const auto k = theory_constants(w, L, gamma);
        std::printf("C3=%.17g\nA1=%.17g\nA2=%.17g\n", k.C3, k.A1, k.A2);
      } catch (const std::invalid_argument& e) {
        std::printf("constants_error=%s\n", e.what());
      }
    }
  }
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot open '" + json_path + "' for writing");
    out << mixing_to_json(w) << '\n';
  }
  return report.valid() ? 0 : 3;
}

int lemma_command(std::uint64_t seed) {
  bool all = true;
  for (const auto& line : lemma_check(seed)) {
    std::printf("%-26s %s residual=%.3e  %s\n", line.name.c_str(), line.passed ? "PASS" : "FAIL",
                line.residual, line.detail.c_str());
    all = all && line.passed;
  }
  return all ? 0 : 1;
}

int preset_command(const std::string& name, const std::string& out_path) {
  const ExperimentConfig config = preset(name);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
  out << config_to_json(config) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"d2sim - decentralized SGD simulator (D2, D-PSGD, C-PSGD)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::string report_path;
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("--config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_override, "CSV output path (overrides the config)");
  run->add_option("--report", report_path, "Write the comparison report as JSON");

  std::string kind = "ring";
  Index n = 5;
  std::string scheme = "uniform-neighbor";
  std::optional<double> self_weight;
  std::string json_path;
  double L = 1.0;
  double gamma = 0.0;
  auto* spectrum = app.add_subcommand("spectrum", "Print the validation report of a mixing matrix");
  spectrum->add_option("--topology", kind, "ring | complete | star")->required();
  spectrum->add_option("--n", n, "Worker count")->required();
  spectrum->add_option("--scheme", scheme, "uniform-neighbor | lazy-metropolis | mean-all")->required();
  spectrum->add_option("--self-weight", self_weight, "Override the uniform-neighbor diagonal");
  spectrum->add_option("--json", json_path, "Dump the matrix and spectrum as JSON");
  spectrum->add_option("--L", L, "Smoothness constant for C3, A1, A2");
  spectrum->add_option("--gamma", gamma, "Stepsize for C3, A1, A2");

  std::uint64_t seed = 0;
  auto* lemma = app.add_subcommand("lemma-check", "Run the seeded oracle sweeps");
  lemma->add_option("--seed", seed, "Root seed");

  std::string preset_name;
  std::string preset_out;
  auto* preset_cmd = app.add_subcommand("preset", "Write a bundled experiment config");
  preset_cmd->add_option("name", preset_name, "unshuffled-ring | shuffled-ring | deterministic-quadratic")
      ->required();
  preset_cmd->add_option("--out", preset_out, "Destination path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, out_override, report_path);
    if (*spectrum) return spectrum_command(kind, n, scheme, self_weight, json_path, L, gamma);
    if (*lemma) return lemma_command(seed);
    if (*preset_cmd) return preset_command(preset_name, preset_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
