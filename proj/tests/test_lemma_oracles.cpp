#include "d2sim/lemma_oracles.hpp"

#include <random>

#include <gtest/gtest.h>

#include "d2sim/mixing.hpp"

namespace d2sim {
namespace {

RecurrenceSpec<double> spec(double rho, double a1, std::vector<double> beta, Index horizon) {
  RecurrenceSpec<double> s;
  s.rho = rho;
  s.a1 = a1;
  s.beta = std::move(beta);
  s.horizon = horizon;
  return s;
}

TEST(Recurrence, QuarterRhoHandValues) {
  const auto a = recurrence_direct(spec(0.25, 1.0, {}, 5));
  ASSERT_EQ(a.size(), 5u);
  EXPECT_DOUBLE_EQ(a[0], 1.0);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  EXPECT_DOUBLE_EQ(a[2], 0.0);
  EXPECT_DOUBLE_EQ(a[3], -0.125);
  EXPECT_DOUBLE_EQ(a[4], -0.0625);
  const auto closed = recurrence_closed_form(spec(0.25, 1.0, {}, 5));
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(closed[k], a[k], 1e-15);
}

TEST(Recurrence, ZeroStartStaysZero) {
  for (double a : recurrence_direct(spec(0.7, 0.0, {}, 20))) EXPECT_EQ(a, 0.0);
  for (double a : recurrence_closed_form(spec(-0.2, 0.0, {}, 20))) EXPECT_EQ(a, 0.0);
}

TEST(Recurrence, HalfRhoWithForcing) {
  // beta_1 = 1: a_2 = 0.5 * 2 * 1 + 1 = 2, a_3 = 0.5 * (4 - 1) = 1.5,
  // a_4 = 0.5 * (3 - 2) = 0.5.
  const auto s = spec(0.5, 1.0, {1.0}, 4);
  const auto a = recurrence_direct(s);
  EXPECT_DOUBLE_EQ(a[1], 2.0);
  EXPECT_DOUBLE_EQ(a[2], 1.5);
  EXPECT_DOUBLE_EQ(a[3], 0.5);
  const auto closed = recurrence_closed_form(s);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(closed[k], a[k], 1e-14);
}

TEST(Recurrence, ClosedFormMatchesDirectBothRegimes) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> pos(0.01, 0.99), neg(-0.33, -0.01), unit(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double rho = trial % 2 ? pos(gen) : neg(gen);
    std::vector<double> beta(100);
    for (auto& b : beta) b = unit(gen);
    const auto s = spec(rho, unit(gen), beta, 100);
    const auto d = recurrence_direct(s);
    const auto c = recurrence_closed_form(s);
    for (std::size_t k = 0; k < d.size(); ++k) ASSERT_NEAR(c[k], d[k], 1e-10) << "rho " << rho;
  }
}

TEST(Recurrence, DivergesBelowNegativeThird) {
  const auto inside = recurrence_direct(spec(-0.32, 1.0, {}, 400));
  const auto outside = recurrence_direct(spec(-0.34, 1.0, {}, 400));
  EXPECT_LT(std::abs(inside.back()), 1e-3);
  EXPECT_GT(std::abs(outside.back()), 1.0);
  EXPECT_THROW(recurrence_closed_form(spec(-0.34, 1.0, {}, 10)), std::invalid_argument);
  EXPECT_THROW(recurrence_closed_form(spec(0.0, 1.0, {}, 10)), std::invalid_argument);
}

TEST(GeometricSums, HandExample) {
  const auto r = geometric_sum_bounds(0.5, std::vector<double>{1.0, 1.0, 1.0}, 3);
  ASSERT_EQ(r.a.size(), 3u);
  EXPECT_DOUBLE_EQ(r.a[2], 1.75);
  EXPECT_DOUBLE_EQ(r.S, 4.25);
  EXPECT_DOUBLE_EQ(r.S_bound, 6.0);
  EXPECT_DOUBLE_EQ(r.D, 6.3125);
  EXPECT_DOUBLE_EQ(r.D_bound, 12.0);
  EXPECT_TRUE(r.holds);
}

TEST(GeometricSums, ZeroRhoIsTight) {
  const std::vector<double> b{0.5, 2.0, 1.0};
  const auto r = geometric_sum_bounds(0.0, b, 3);
  EXPECT_EQ(r.a, b);
  EXPECT_DOUBLE_EQ(r.S, r.S_bound);
  EXPECT_DOUBLE_EQ(r.D, r.D_bound);
}

TEST(GeometricSums, RandomSweep) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unit;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> b(1 + trial % 40);
    for (auto& x : b) x = 3.0 * unit(gen);
    EXPECT_TRUE(geometric_sum_bounds(0.999 * unit(gen), b, static_cast<Index>(b.size())).holds);
  }
}

TEST(GeometricSums, RejectsBadInput) {
  EXPECT_THROW(geometric_sum_bounds(1.0, std::vector<double>{1.0}, 1), std::invalid_argument);
  EXPECT_THROW(geometric_sum_bounds(0.5, std::vector<double>{-1.0}, 1), std::invalid_argument);
}

TEST(Rotation, IdentityAndZero) {
  const Matrix x = Matrix::Random(3, 4);
  const auto r = rotation_invariance_check(x, Matrix::Identity(4, 4));
  EXPECT_TRUE(r.holds);
  EXPECT_DOUBLE_EQ(r.rotated_sq, r.norm_sq);
  const auto z = rotation_invariance_check(Matrix::Zero(3, 4), Matrix::Identity(4, 4));
  EXPECT_EQ(z.norm_sq, 0.0);
  EXPECT_EQ(z.tail_sq, 0.0);
  EXPECT_TRUE(z.holds);
}

TEST(Rotation, MixingEigenvectors) {
  const auto w = build_mixing_matrix(build_topology(TopologyKind::ring, 5), MixingScheme::uniform_neighbor);
  const Matrix x = Matrix::Random(6, 5);
  const auto r = rotation_invariance_check(x, w.eigenvectors());
  EXPECT_TRUE(r.holds);
  EXPECT_LE(r.max_residual, 1e-8);
  EXPECT_LE(r.tail_sq, r.norm_sq);
}

TEST(Rotation, RejectsNonOrthogonal) {
  EXPECT_THROW(rotation_invariance_check(Matrix::Random(2, 2), Matrix::Constant(2, 2, 1.0)),
               std::invalid_argument);
}

TEST(NegativeBranch, StatedFormIsSmallerThanIntermediate) {
  for (double ln : {-0.05, -0.2, -0.3}) {
    const auto w = negative_branch_weights(ln);
    EXPECT_NEAR(w.modulus, negative_mode_modulus(ln), 1e-15);
    EXPECT_LE(w.stated, w.intermediate);
    EXPECT_NEAR(w.stated, spectral_constants(0.0, ln).second, 1e-15);
  }
}

}  // namespace
}  // namespace d2sim
