#include <gtest/gtest.h>

#include <cmath>

#include "clipsgd/clip.hpp"

using namespace clipsgd;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

Vector random_gradient(Rng& rng, Eigen::Index d) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> exponent(-8.0, 8.0);
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(rng);
  return v * std::pow(10.0, exponent(rng));
}

// Cone of slope G at the origin, evaluated at e_1 where ||dF|| = G.
struct ConeAtUnit {
  ProblemPtr problem;
  Vector x;
  ConeAtUnit(double G, Eigen::Index d) : problem(make_distance_cone(G, Vector::Zero(d))), x(Vector::Unit(d, 0)) {}
};

}  // namespace

TEST(Clip, Examples) {
  EXPECT_EQ(clip(vec({3.0, 4.0}), 10.0), vec({3.0, 4.0}));
  const Vector c = clip(vec({3.0, 4.0}), 2.5);
  EXPECT_NEAR(c[0], 1.5, 1e-15);
  EXPECT_NEAR(c[1], 2.0, 1e-15);
  EXPECT_EQ(clip(Vector::Zero(4), 0.1), Vector::Zero(4));
  EXPECT_THROW(clip(vec({1.0}), 0.0), DomainError);
  EXPECT_THROW(clip(vec({1.0}), -1.0), DomainError);
}

TEST(Clip, DualNormForSimplex) {
  const Vector c = clip(vec({3.0, -6.0, 1.0}), 2.0, NormTag::L1Simplex);
  EXPECT_NEAR(c[0], 1.0, 1e-15);
  EXPECT_NEAR(c[1], -2.0, 1e-15);
  EXPECT_LE(c.cwiseAbs().maxCoeff(), 2.0);
}

TEST(Clip, OutputNormNeverExceedsLevel) {
  Rng rng(1);
  std::uniform_real_distribution<double> level_exp(-6.0, 6.0);
  for (int k = 0; k < 100000; ++k) {
    const Vector g = random_gradient(rng, 1 + k % 17);
    const double M = std::pow(10.0, level_exp(rng));
    for (NormTag tag : {NormTag::L2, NormTag::L1Simplex}) {
      const Vector c = clip(g, M, tag);
      ASSERT_LE(dual_norm(c, tag), M);
    }
  }
}

TEST(Clip, Idempotent) {
  Rng rng(2);
  for (int k = 0; k < 20000; ++k) {
    const Vector g = random_gradient(rng, 1 + k % 9);
    const double M = 0.5 * g.norm() + 1e-300;
    const Vector once = clip(g, M);
    ASSERT_EQ(clip(once, M), once);
  }
}

TEST(Clip, HomogeneousInThreshold) {
  Rng rng(3);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  for (int k = 0; k < 20000; ++k) {
    const Vector g = random_gradient(rng, 1 + k % 9);
    const double n = g.norm();
    const double M = unit(rng) * n;
    const double lambda = unit(rng) * n / M;  // lambda M <= ||g||
    const Vector lhs = clip(g, lambda * M);
    const Vector rhs = lambda * clip(g, M);
    ASSERT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
  }
}

TEST(ClipBounds, ZeroNoisePassesTrivially) {
  ConeAtUnit cone(1.0, 5);
  Rng rng(4);
  const ClipReport report = verify_clip_bounds(*cone.problem, NoiseModel::zero(5, 1.5), cone.x, 2.0, 10000, rng);
  EXPECT_EQ(report.stats.mean_sq_unbiased, 0.0);
  EXPECT_EQ(report.stats.bias_norm, 0.0);
  ASSERT_EQ(report.checks.size(), 4u);
  EXPECT_TRUE(report.pass());
}

TEST(ClipBounds, HeavyTailedExampleAtMillionSamples) {
  ConeAtUnit cone(1.0, 10);
  Rng rng = make_stream(1, 0);
  const ClipReport report =
      verify_clip_bounds(*cone.problem, NoiseModel::sphere_pareto(10, 1.5, 1.0), cone.x, 2.0, 1000000, rng);
  for (const auto& check : report.checks) {
    EXPECT_TRUE(check.pass) << check.name << ": " << check.estimate << " vs " << check.bound << " + "
                            << check.cushion;
  }
  EXPECT_LE(report.stats.max_unbiased_norm, 4.0);
  EXPECT_GT(report.stats.mean_sq_unbiased, 0.0);
}

// The trend is measured on the clipping residual clip(dF + xi) - (dF + xi),
// whose mean is the bias (E xi = 0) and whose variance vanishes as M grows;
// the plain mean(g) - dF estimate is dominated by sampling noise at large M.
TEST(ClipBounds, BiasShrinksAsLevelGrows) {
  ConeAtUnit cone(1.0, 10);
  const NoiseModel noise = NoiseModel::sphere_pareto(10, 1.5, 1.0);
  const Vector grad = cone.problem->subgradient(cone.x);
  const std::size_t n = 200000;
  double previous = std::numeric_limits<double>::infinity();
  for (double M : {2.0, 8.0, 32.0, 128.0, 1000.0}) {
    Rng rng = make_stream(8, 0);  // common random numbers across levels
    Vector residual = Vector::Zero(10);
    for (std::size_t i = 0; i < n; ++i) {
      const Vector raw = grad + draw(noise, rng);
      residual += clip(raw, M) - raw;
    }
    const double bias = (residual / static_cast<double>(n)).norm();
    EXPECT_LT(bias, previous) << "M = " << M;
    EXPECT_LE(bias, 2.0 * std::pow(M, -0.5)) << "M = " << M;
    previous = bias;

    Rng replay = make_stream(8, 0);
    const ClipReport report = verify_clip_bounds(*cone.problem, noise, cone.x, M, n, replay);
    EXPECT_TRUE(report.pass()) << "M = " << M;
    EXPECT_NEAR(report.stats.bias_norm, bias, 3.0 * report.stats.mean_standard_error + 1e-15) << "M = " << M;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(ClipBounds, SimplexGeometryUsesDualNorm) {
  Vector cost(6);
  cost << 0.3, 0.9, 0.1, 0.5, 0.7, 0.2;
  const ProblemPtr simplex = make_simplex_linear(cost);
  const NoiseModel noise = NoiseModel::sphere_pareto(6, 1.5, 2.0, 0.0, NormTag::L1Simplex);
  Rng rng = make_stream(3, 3);
  const ClipReport report =
      verify_clip_bounds(*simplex, noise, Vector::Constant(6, 1.0 / 6.0), 4.0, 200000, rng);
  EXPECT_EQ(report.stats.norm, NormTag::L1Simplex);
  EXPECT_TRUE(report.pass());
}

TEST(ClipBounds, Preconditions) {
  ConeAtUnit cone(1.0, 3);
  Rng rng(5);
  const NoiseModel noise = NoiseModel::sphere_pareto(3, 1.5, 1.0);
  EXPECT_THROW(verify_clip_bounds(*cone.problem, noise, cone.x, 1.9, 10000, rng), PreconditionError);
  EXPECT_THROW(verify_clip_bounds(*cone.problem, noise, cone.x, 2.0, 9999, rng), PreconditionError);
  EXPECT_THROW(verify_clip_bounds(*cone.problem, NoiseModel::sphere_pareto(4, 1.5, 1.0), cone.x, 2.0, 10000, rng),
               DomainError);
}

TEST(ClipBounds, ReplayMatchesFreshStream) {
  ConeAtUnit cone(1.0, 4);
  const NoiseModel noise = NoiseModel::sphere_pareto(4, 1.3, 0.5);
  Rng a = make_stream(6, 1);
  Rng b = make_stream(6, 1);
  const ClipReport ra = verify_clip_bounds(*cone.problem, noise, cone.x, 3.0, 20000, a);
  const ClipReport rb = verify_clip_bounds(*cone.problem, noise, cone.x, 3.0, 20000, b);
  EXPECT_EQ(ra.stats.mean_sq_unbiased, rb.stats.mean_sq_unbiased);
  EXPECT_EQ(ra.stats.bias_norm, rb.stats.bias_norm);
}
