#include "d2sim/optimizers.hpp"

#include <gtest/gtest.h>

#include "d2sim/metrics.hpp"

namespace d2sim {
namespace {

// f(x) = (x - 1)^2 / 2 on a single worker.
ProblemInstance unit_quadratic() {
  ProblemParams params;
  Shard s;
  s.features = Matrix::Ones(1, 1);
  s.targets = Vector::Ones(1);
  return ProblemInstance(params, {s});
}

MixingMatrix ring(Index n) {
  return build_mixing_matrix(build_topology(TopologyKind::ring, n), MixingScheme::uniform_neighbor);
}

MixingMatrix mean_all(Index n) {
  return build_mixing_matrix(build_topology(TopologyKind::complete, n), MixingScheme::mean_all);
}

TEST(D2Step, SingleWorkerHandRecursion) {
  const auto p = unit_quadratic();
  const Matrix w = Matrix::Ones(1, 1);
  auto s = OptimizerState<double>::initial(Algorithm::d2, 1, 1);
  Matrix g = p.full_local_gradient(0, s.X.col(0));
  s = d2_step(s, g, w, 0.1);
  EXPECT_DOUBLE_EQ(s.X(0, 0), 0.1);
  g = p.full_local_gradient(0, s.X.col(0));
  EXPECT_DOUBLE_EQ(g(0, 0), -0.9);
  s = d2_step(s, g, w, 0.1);
  EXPECT_NEAR(s.X(0, 0), 0.19, 1e-15);
  // One plain gradient-descent step from x1 = 0.1.
  EXPECT_NEAR(s.X(0, 0), 0.1 - 0.1 * (0.1 - 1.0), 1e-15);
  EXPECT_EQ(s.t, 2);
}

TEST(DpsgdStep, SingleWorkerIsSgd) {
  auto s = OptimizerState<double>::initial(Algorithm::dpsgd, 2, 1);
  s.X << 1.0, 2.0;
  Matrix g(2, 1);
  g << 0.5, -1.0;
  const auto next = dpsgd_step(s, g, Matrix::Ones(1, 1), 0.2);
  EXPECT_DOUBLE_EQ(next.X(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(next.X(1, 0), 2.2);
}

TEST(CpsgdStep, ZeroGradientLeavesStateUnchanged) {
  auto s = OptimizerState<double>::initial(Algorithm::cpsgd, 3, 4);
  s.X.colwise() = Vector::LinSpaced(3, 1.0, 3.0);
  const auto next = cpsgd_step(s, Matrix::Zero(3, 4), 0.5);
  EXPECT_EQ(next.X, s.X);
}

TEST(CpsgdStep, AveragesGradients) {
  auto s = OptimizerState<double>::initial(Algorithm::cpsgd, 1, 2);
  Matrix g(1, 2);
  g << 1.0, 3.0;
  const auto next = cpsgd_step(s, g, 0.5);
  EXPECT_DOUBLE_EQ(next.X(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(next.X(0, 1), -1.0);
}

TEST(CpsgdStep, RejectsNonConsensusState) {
  auto s = OptimizerState<double>::initial(Algorithm::cpsgd, 2, 3);
  s.X(0, 1) = 1.0;
  EXPECT_THROW(cpsgd_step(s, Matrix::Zero(2, 3), 0.1), std::invalid_argument);
}

TEST(Steps, RejectBadInputs) {
  const auto s = OptimizerState<double>::initial(Algorithm::d2, 2, 3);
  const Matrix w = Matrix::Constant(3, 3, 1.0 / 3.0);
  EXPECT_THROW(d2_step(s, Matrix::Zero(2, 2), w, 0.1), std::invalid_argument);
  EXPECT_THROW(d2_step(s, Matrix::Zero(2, 3), w, 0.0), std::invalid_argument);
  EXPECT_THROW(d2_step(s, Matrix::Zero(2, 3), Matrix::Identity(2, 2), 0.1), std::invalid_argument);
  EXPECT_THROW(dpsgd_step(s, Matrix::Zero(2, 3), w, 0.1), std::invalid_argument);
  EXPECT_THROW(cpsgd_step(s, Matrix::Zero(2, 3), 0.1), std::invalid_argument);
}

TEST(GossipAverage, EqualsMatrixProduct) {
  const auto w = ring(6);
  const Matrix half = Matrix::Random(4, 6);
  EXPECT_LE((gossip_average(half, w.weights()) - half * w.weights()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Steps, MeanEvolutionIdentity) {
  const auto p = gen_least_squares(5, 4, 20, 1.0, 0.5, 3);
  const auto w = ring(5);
  for (Algorithm a : {Algorithm::d2, Algorithm::dpsgd}) {
    auto s = OptimizerState<double>::initial(a, p.dim(), 5);
    for (Index t = 0; t < 200; ++t) {
      const Matrix g = sample_gradients(p, s.X, {Sampling::with_replacement, 2}, 11, t);
      const auto next = step(s, g, w.weights(), 0.05);
      const Vector residual = next.mean() - s.mean() + 0.05 * g.rowwise().mean();
      ASSERT_LE(residual.norm(), 1e-12 * (1.0 + s.mean().norm())) << to_string(a) << " t=" << t;
      s = next;
    }
  }
}

TEST(Steps, StepsDoNotMutateInputs) {
  const auto w = ring(3);
  auto s = OptimizerState<double>::initial(Algorithm::d2, 2, 3);
  s.X.setRandom();
  s.t = 1;
  const auto copy = s;
  const Matrix g = Matrix::Random(2, 3);
  (void)d2_step(s, g, w.weights(), 0.1);
  EXPECT_EQ(s.X, copy.X);
  EXPECT_EQ(s.X_prev, copy.X_prev);
  EXPECT_EQ(s.t, 1);
}

TEST(Run, ConsensusCollapseWithMeanAll) {
  const auto p = gen_least_squares(4, 3, 10, 1.0, 0.5, 8);
  const auto w = mean_all(4);
  RunOptions options;
  options.observer = [](const auto&, const auto&, const OptimizerState<double>& after) {
    for (Index i = 1; i < after.workers(); ++i)
      ASSERT_LE((after.X.col(i) - after.X.col(0)).norm(), 1e-14);
  };
  const auto d2 = run(Algorithm::d2, p, w, 0.05, 50, {Sampling::with_replacement, 2}, 5, options);
  const auto c = run(Algorithm::cpsgd, p, w, 0.05, 50, {Sampling::with_replacement, 2}, 5);
  ASSERT_EQ(d2.records.size(), c.records.size());
  for (std::size_t k = 0; k < d2.records.size(); ++k)
    EXPECT_NEAR(d2.records[k].loss_mean_model, c.records[k].loss_mean_model,
                1e-12 * std::abs(c.records[k].loss_mean_model));
}

TEST(Run, ZeroVarianceHomogeneousTrajectoriesCoincide) {
  const auto p = gen_least_squares(5, 4, 8, 0.0, 0.0, 2);
  const auto w = ring(5);
  const BatchSpec full{Sampling::full_batch, 0};
  const auto a = run(Algorithm::d2, p, w, 0.05, 60, full, 1);
  const auto b = run(Algorithm::dpsgd, p, w, 0.05, 60, full, 1);
  const auto c = run(Algorithm::cpsgd, p, w, 0.05, 60, full, 1);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_NEAR(a.records[k].loss_mean_model, c.records[k].loss_mean_model, 1e-12);
    EXPECT_NEAR(b.records[k].loss_mean_model, c.records[k].loss_mean_model, 1e-12);
  }
  EXPECT_LE((a.output - c.output).norm(), 1e-12);
}

TEST(Run, LogsAtStartIntervalAndEnd) {
  const auto p = gen_least_squares(3, 2, 4, 0.5, 0.0, 1);
  RunOptions options;
  options.log_every = 4;
  const auto t = run(Algorithm::dpsgd, p, ring(3), 0.05, 10, {Sampling::full_batch, 0}, 0, options);
  std::vector<Index> iters;
  for (const auto& r : t.records) iters.push_back(r.t);
  EXPECT_EQ(iters, (std::vector<Index>{0, 4, 8, 10}));
  EXPECT_EQ(t.records.front().loss_mean_model, p.loss(Vector::Zero(2)));
}

TEST(Run, SingleRound) {
  const auto p = gen_least_squares(3, 2, 4, 0.5, 0.0, 1);
  int rounds = 0;
  RunOptions options;
  options.observer = [&](const auto& before, const auto&, const auto& after) {
    EXPECT_EQ(before.t, 0);
    EXPECT_EQ(after.t, 1);
    ++rounds;
  };
  const auto t = run(Algorithm::d2, p, ring(3), 0.05, 1, {Sampling::with_replacement, 1}, 0, options);
  EXPECT_EQ(rounds, 1);
  EXPECT_EQ(t.records.back().t, 1);
  EXPECT_THROW(run(Algorithm::d2, p, ring(3), 0.05, 0, {}, 0), std::invalid_argument);
}

TEST(Run, Deterministic) {
  const auto p = gen_least_squares(5, 3, 10, 1.0, 1.0, 6);
  const auto a = run(Algorithm::d2, p, ring(5), 0.02, 40, {Sampling::with_replacement, 3}, 99);
  const auto b = run(Algorithm::d2, p, ring(5), 0.02, 40, {Sampling::with_replacement, 3}, 99);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].loss_mean_model, b.records[k].loss_mean_model);
    EXPECT_EQ(a.records[k].consensus_err, b.records[k].consensus_err);
  }
  EXPECT_EQ(a.output, b.output);
}

TEST(Run, SampleStreamsIgnoreIterates) {
  const auto p = gen_least_squares(3, 2, 10, 1.0, 1.0, 6);
  std::vector<std::vector<Index>> a, b;
  (void)sample_gradients(p, Matrix::Zero(2, 3), {Sampling::with_replacement, 4}, 7, 12, &a);
  (void)sample_gradients(p, Matrix::Random(2, 3), {Sampling::with_replacement, 4}, 7, 12, &b);
  EXPECT_EQ(a, b);
}

TEST(Run, InvalidMixingRejectedForDecentralizedOnly) {
  const auto p = gen_least_squares(4, 2, 4, 0.5, 0.0, 1);
  const auto bad = build_mixing_matrix(build_topology(TopologyKind::ring, 4),
                                       MixingScheme::uniform_neighbor, 0.0);
  EXPECT_THROW(run(Algorithm::d2, p, bad, 0.05, 5, {}, 0), std::invalid_argument);
  EXPECT_NO_THROW(run(Algorithm::cpsgd, p, bad, 0.05, 5, {}, 0));
}

TEST(Run, LargeStepsizeOnlyWarns) {
  const auto p = gen_least_squares(5, 2, 4, 0.5, 0.0, 1);
  const auto t = run(Algorithm::d2, p, ring(5), 0.2, 5, {Sampling::full_batch, 0}, 0);
  ASSERT_FALSE(t.warnings.empty());
  EXPECT_NE(t.warnings.front().find("C3"), std::string::npos);
}

TEST(Run, DeterministicQuadraticSeparatesD2FromDpsgd) {
  const auto p = gen_least_squares(5, 10, 40, 1.0, 0.0, 7);
  const BatchSpec full{Sampling::full_batch, 0};
  RunOptions options;
  options.log_every = 1000;
  const auto d2 = run(Algorithm::d2, p, ring(5), 0.1, 3000, full, 0, options);
  const auto dp = run(Algorithm::dpsgd, p, ring(5), 0.1, 3000, full, 0, options);
  EXPECT_LE(d2.records.back().grad_norm_sq_mean_model, 1e-16);
  EXPECT_GT(dp.records.back().grad_norm_sq_mean_model, 1e-8);
}

TEST(Algorithm, Names) {
  for (auto a : {Algorithm::d2, Algorithm::dpsgd, Algorithm::cpsgd})
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  EXPECT_THROW(parse_algorithm("adam"), std::invalid_argument);
}

}  // namespace
}  // namespace d2sim
