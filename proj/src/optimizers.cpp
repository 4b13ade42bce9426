#include "d2sim/optimizers.hpp"

#include <cstdio>

namespace d2sim {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::d2: return "d2";
    case Algorithm::dpsgd: return "dpsgd";
    case Algorithm::cpsgd: return "cpsgd";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "d2") return Algorithm::d2;
  if (name == "dpsgd") return Algorithm::dpsgd;
  if (name == "cpsgd") return Algorithm::cpsgd;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

OptimizerState<double> step(const OptimizerState<double>& state, const Matrix& grads,
                            const Matrix& weights, double gamma) {
  switch (state.algorithm) {
    case Algorithm::d2: return d2_step(state, grads, weights, gamma);
    case Algorithm::dpsgd: return dpsgd_step(state, grads, weights, gamma);
    case Algorithm::cpsgd: return cpsgd_step(state, grads, gamma);
  }
  throw std::logic_error("step: unknown algorithm");
}

Matrix sample_gradients(const ProblemInstance& problem, const Matrix& X, const BatchSpec& batch,
                        std::uint64_t root_seed, Index iteration,
                        std::vector<std::vector<Index>>* indices) {
  Matrix grads(problem.dim(), problem.workers());
  if (indices) indices->assign(static_cast<std::size_t>(problem.workers()), {});
  for (Index i = 0; i < problem.workers(); ++i) {
    auto rng = CounterRng::for_round(root_seed, static_cast<std::uint64_t>(i),
                                     static_cast<std::uint64_t>(iteration));
    auto sample = stochastic_gradient(problem, i, X.col(i), batch.size, rng, batch.sampling);
    grads.col(i) = sample.value;
    if (indices) (*indices)[static_cast<std::size_t>(i)] = std::move(sample.indices);
  }
  return grads;
}

Trajectory run(Algorithm algorithm, const ProblemInstance& problem, const MixingMatrix& w,
               double gamma, Index T, const BatchSpec& batch, std::uint64_t seed,
               const RunOptions& options) {
  if (T < 1) throw std::invalid_argument("run: T must be >= 1");
  if (options.log_every < 1) throw std::invalid_argument("run: log_every must be >= 1");
  if (w.size() != problem.workers())
    throw std::invalid_argument("run: mixing matrix size differs from the worker count");

  Trajectory out;
  out.algorithm = algorithm;
  out.gamma = gamma;
  out.seed = seed;
  out.problem = problem.params();

  if (algorithm != Algorithm::cpsgd) {
    const auto report = validate(w);
    if (!report.valid()) throw std::invalid_argument("run: invalid mixing matrix: " + report.reasons());
    try {
      (void)theory_constants(w, problem.smoothness(), gamma);
    } catch (const std::invalid_argument& e) {
      out.warnings.emplace_back(e.what());
    }
  }

  auto state = OptimizerState<double>::initial(algorithm, problem.dim(), problem.workers());
  out.records.push_back(evaluate(problem, state.X, 0));
  for (Index t = 0; t < T; ++t) {
    const Matrix grads = sample_gradients(problem, state.X, batch, seed, t);
    auto next = step(state, grads, w.weights(), gamma);
    if (options.observer) options.observer(state, grads, next);
    state = std::move(next);
    if (state.t % options.log_every == 0 || state.t == T)
      out.records.push_back(evaluate(problem, state.X, state.t));
  }
  out.output = state.mean();
  if (!out.output.allFinite()) out.warnings.emplace_back("iterates diverged to non-finite values");
  return out;
}

}  // namespace d2sim
