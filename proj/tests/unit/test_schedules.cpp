#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "clipsgd/optimizer.hpp"
#include "clipsgd/schedules.hpp"

using namespace clipsgd;

namespace {

ScheduleSpec convex(ScheduleKind kind, double G, double M, double p, double alpha, std::size_t T = 0) {
  ScheduleSpec s;
  s.kind = kind;
  s.G = G;
  s.M = M;
  s.p = p;
  s.alpha = alpha;
  s.horizon = T;
  return s;
}

ScheduleSpec dog_spec(double G, double sigma, double p, double r, double delta = 0.05) {
  ScheduleSpec s;
  s.kind = ScheduleKind::DistanceAdaptive;
  s.G = G;
  s.sigma = sigma;
  s.p = p;
  s.r = r;
  s.delta = delta;
  return s;
}

// Second implementation of the adaptive constants, in long double.
std::pair<long double, long double> dog_constants_oracle(long double W, long double delta) {
  const long double L = std::log(4.0L / delta);
  const long double a1 = 1.0L / std::sqrt(32.0L * W);
  const long double branch1 = 1.0L / (8.0L * L * (16.0L / 3.0L + 8.0L * std::sqrt(5.0L * W) + 4.0L * W));
  const long double branch2 = 1.0L / std::sqrt(16.0L * L * (32.0L / 3.0L + 8.0L * std::sqrt(5.0L * W) + 80.0L * W));
  EXPECT_GT(branch1, 0.0L);
  EXPECT_GT(branch2, 0.0L);
  return {a1, std::min(branch1, branch2)};
}

}  // namespace

TEST(Anytime, Examples) {
  const StepParams a = anytime_convex(9, convex(ScheduleKind::AnytimeConvex, 1.0, 1.0, 2.0, 1.0));
  EXPECT_EQ(a.clip_level, 3.0);
  EXPECT_NEAR(a.step_size, 1.0 / 3.0, 1e-16);

  for (std::size_t t : {1u, 2u, 4u, 100u, 12345u}) {
    const StepParams b = anytime_convex(t, convex(ScheduleKind::AnytimeConvex, 1.0, 0.0, 1.5, 0.7));
    EXPECT_EQ(b.clip_level, 2.0);
    EXPECT_NEAR(b.step_size, std::min(0.7 / std::sqrt(double(t)), 0.35), 1e-16);
  }

  const StepParams c = anytime_convex(8, convex(ScheduleKind::AnytimeConvex, 1.0, 1.0, 1.5, 2.0));
  EXPECT_NEAR(c.clip_level, 4.0, 1e-14);
  EXPECT_NEAR(c.step_size, std::min(2.0 / std::sqrt(8.0), 0.5), 1e-15);

  EXPECT_THROW(anytime_convex(0, convex(ScheduleKind::AnytimeConvex, 1.0, 1.0, 2.0, 1.0)), DomainError);
}

TEST(Anytime, BetaDerivesAlpha) {
  ScheduleSpec s = convex(ScheduleKind::AnytimeConvex, 1.0, 0.0, 2.0, 1.0);
  s.alpha.reset();
  s.beta = 10.0;
  s.delta = 0.05;
  EXPECT_DOUBLE_EQ(s.resolved_alpha(), 10.0 / std::log(80.0));
  s.beta.reset();
  EXPECT_THROW(s.resolved_alpha(), DomainError);
}

TEST(Fixed, Examples) {
  for (std::size_t t : {1u, 50u, 100u}) {
    const StepParams a = fixed_convex(t, convex(ScheduleKind::FixedConvex, 1.0, 1.0, 2.0, 1.0, 100));
    EXPECT_EQ(a.clip_level, 10.0);
    EXPECT_NEAR(a.step_size, 0.1, 1e-16);
  }
  const StepParams b = fixed_convex(3, convex(ScheduleKind::FixedConvex, 1.0, 0.0, 1.5, 3.0, 16));
  EXPECT_EQ(b.clip_level, 2.0);
  EXPECT_NEAR(b.step_size, std::min(3.0 / 4.0, 1.5), 1e-16);

  const ScheduleSpec one = convex(ScheduleKind::FixedConvex, 1.3, 0.8, 1.4, 0.9, 1);
  const StepParams f = fixed_convex(1, one);
  const StepParams g = anytime_convex(1, one);
  EXPECT_EQ(f.clip_level, g.clip_level);
  EXPECT_EQ(f.step_size, g.step_size);

  EXPECT_THROW(fixed_convex(101, convex(ScheduleKind::FixedConvex, 1.0, 1.0, 2.0, 1.0, 100)), DomainError);
  EXPECT_THROW(fixed_convex(1, convex(ScheduleKind::FixedConvex, 1.0, 1.0, 2.0, 1.0, 0)), DomainError);
}

TEST(Strongly, Examples) {
  ScheduleSpec s = convex(ScheduleKind::StronglyConvex, 1.0, 3.0, 1.5, 1.0);
  s.mu = 2.0;
  EXPECT_DOUBLE_EQ(strongly_convex(3, s).step_size, 0.5);
  s.mu = 1.0;
  EXPECT_DOUBLE_EQ(strongly_convex(1, s).step_size, 2.0);
  EXPECT_NEAR(strongly_convex(8, s).clip_level, 12.0, 1e-14);
  s.mu = 0.0;
  EXPECT_THROW(strongly_convex(1, s), DomainError);
}

TEST(Weights, Examples) {
  const WeightFamily log_sq{WeightFamily::Kind::LogSquared, 0, 1.0};
  EXPECT_EQ(w_sequence(1, log_sq).w, 1.0);
  EXPECT_DOUBLE_EQ(w_sequence(1, log_sq).total, 1.0 + std::numbers::pi / 2.0);

  // Iteration indices are integers, so the t = e values (w = 2 for
  // LogSquared, w = 4 for IteratedLog(0, 1)) are checked on the formulas and
  // the implementation is compared with direct evaluation at t = 3.
  EXPECT_NEAR(1.0 + std::pow(std::log(std::numbers::e), 2.0), 2.0, 1e-15);
  const WeightFamily iter0{WeightFamily::Kind::IteratedLog, 0, 1.0};
  const double y3 = 1.0 + std::log(3.0);
  EXPECT_NEAR(w_sequence(3, iter0).w, y3 * y3, 1e-14);
  EXPECT_EQ(w_sequence(3, iter0).total, 2.0);
  EXPECT_NEAR(std::pow(1.0 + std::log(std::numbers::e), 2.0), 4.0, 1e-15);

  const WeightFamily iter2{WeightFamily::Kind::IteratedLog, 2, 0.5};
  const double t = 1000.0;
  const double y1 = 1.0 + std::log(t);
  const double y2 = 1.0 + std::log(y1);
  const double y3b = 1.0 + std::log(y2);
  EXPECT_NEAR(w_sequence(1000, iter2).w, std::pow(y3b, 1.5) * y1 * y2, 1e-12);
  EXPECT_EQ(w_sequence(1000, iter2).total, 3.0);

  EXPECT_NEAR(w_sequence(1000, log_sq).w, 1.0 + std::log(t) * std::log(t), 1e-12);
  EXPECT_THROW(w_sequence(0, log_sq), DomainError);
  EXPECT_THROW(w_sequence(5, WeightFamily{WeightFamily::Kind::IteratedLog, 0, 0.0}), DomainError);
  EXPECT_THROW(w_sequence(5, WeightFamily{WeightFamily::Kind::IteratedLog, 0, -1.0}), DomainError);
}

TEST(Weights, PartialSumsBoundedByW) {
  const std::vector<WeightFamily> families = {
      {WeightFamily::Kind::LogSquared, 0, 1.0},   {WeightFamily::Kind::IteratedLog, 0, 1.0},
      {WeightFamily::Kind::IteratedLog, 1, 1.0},  {WeightFamily::Kind::IteratedLog, 2, 0.5},
      {WeightFamily::Kind::IteratedLog, 0, 0.25}};
  for (const auto& family : families) {
    const double W = w_sequence(1, family).total;
    long double sum = 0.0L;
    for (std::size_t t = 1; t <= 1000000; ++t) {
      sum += 1.0L / (static_cast<long double>(t) * w_sequence(t, family).w);
      ASSERT_LE(sum, W) << "t = " << t;
    }
  }
}

TEST(DogConstants, MatchesOracle) {
  const double W = 1.0 + std::numbers::pi / 2.0;
  EXPECT_DOUBLE_EQ(dog_constants(W, 0.1).alpha1, 1.0 / std::sqrt(32.0 * W));
  const auto [a1, a2] = dog_constants_oracle(2.0L, 0.05L);
  const DogConstants c = dog_constants(2.0, 0.05);
  EXPECT_NEAR(c.alpha1, static_cast<double>(a1), 1e-15);
  EXPECT_NEAR(c.alpha2, static_cast<double>(a2), 1e-15 * static_cast<double>(a2));
  for (double w : {1.1, 2.0, 2.5707963, 5.0, 20.0}) {
    double previous = 0.0;
    for (double delta : {0.001, 0.01, 0.05, 0.2, 0.5, 0.9, 0.99}) {
      const double a = dog_constants(w, delta).alpha2;
      EXPECT_NEAR(a, static_cast<double>(dog_constants_oracle(w, delta).second), 1e-14 * a);
      EXPECT_GT(a, previous);
      previous = a;
    }
  }
  EXPECT_THROW(dog_constants(2.0, 0.0), DomainError);
  EXPECT_THROW(dog_constants(2.0, 1.0), DomainError);
  EXPECT_THROW(dog_constants(0.0, 0.5), DomainError);
}

TEST(DogState, ZeroNoiseSubstitution) {
  const ScheduleSpec s = dog_spec(1.5, 0.0, 1.5, 2.0);
  DogState state(s);
  const Vector x1 = Vector::Zero(3);
  const double W = 1.0 + std::numbers::pi / 2.0;
  const DogConstants c = dog_constants(W, 0.05);
  for (std::size_t t = 1; t <= 200; ++t) {
    const StepParams step = state.step(t, x1, x1);
    const double tw = static_cast<double>(t) * (1.0 + std::pow(std::log(double(t)), 2));
    EXPECT_EQ(step.clip_level, 3.0);
    const double gamma = std::min(c.alpha1 / (1.5 * std::sqrt(tw)), c.alpha2 / 3.0);
    EXPECT_NEAR(step.step_size, 2.0 * gamma, 1e-15 * 2.0 * gamma);
  }
}

TEST(DogState, RunningMaxOfDistance) {
  DogState state(dog_spec(1.0, 1.0, 1.5, 0.1));
  Vector x1 = Vector::Zero(2);
  Vector x2(2);
  x2 << 3.0, 4.0;
  Vector x3(2);
  x3 << 0.1, 0.0;
  state.step(1, x1, x1);
  EXPECT_EQ(state.r_history().back(), 0.1);
  state.step(2, x2, x1);
  EXPECT_EQ(state.r_history().back(), 5.0);
  state.step(3, x3, x1);
  EXPECT_GE(state.r_history().back(), 5.0);
  EXPECT_EQ(state.observe(x1, x1), 5.0);
  EXPECT_EQ(state.r_history().size(), 4u);
  EXPECT_THROW(state.observe(x1, x1), SequenceError);
}

TEST(DogState, RejectsOutOfOrderSteps) {
  DogState state(dog_spec(1.0, 1.0, 1.5, 0.1));
  const Vector x = Vector::Zero(2);
  EXPECT_THROW(state.step(2, x, x), SequenceError);
  state.step(1, x, x);
  EXPECT_THROW(state.step(1, x, x), SequenceError);
  EXPECT_THROW(state.step(3, x, x), SequenceError);
  EXPECT_NO_THROW(state.step(2, x, x));
}

TEST(DogState, ProductBoundAlongRandomTrajectory) {
  Rng rng(1);
  std::normal_distribution<double> normal;
  for (double r : {1e-3, 0.1, 10.0}) {
    ScheduleSpec s = dog_spec(1.0, 5.0, 1.5, r);
    DogState state(s);
    const Vector x1 = Vector::Zero(3);
    Vector x = x1;
    double previous_r = 0.0;
    for (std::size_t t = 1; t <= 20000; ++t) {
      const StepParams step = state.step(t, x, x1);
      const double rt = state.r_history().back();
      ASSERT_LE(step.step_size * step.clip_level, rt * state.constants().alpha2);
      ASSERT_GE(step.clip_level, 2.0);
      ASSERT_GE(rt, previous_r);
      ASSERT_GE(rt, r);
      previous_r = rt;
      for (int i = 0; i < 3; ++i) x[i] += 0.01 * normal(rng);
    }
  }
}

TEST(Invariants, ConvexScheduleProductExactOnRandomGrid) {
  Rng rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const double G = std::pow(10.0, 4.0 * unit(rng) - 2.0);
    const double M = trial % 5 == 0 ? 0.0 : std::pow(10.0, 4.0 * unit(rng) - 2.0);
    const double p = 1.0 + 1e-3 + unit(rng) * (1.0 - 1e-3);
    const double alpha = std::pow(10.0, 4.0 * unit(rng) - 2.0);
    const ScheduleSpec any = convex(ScheduleKind::AnytimeConvex, G, M, p, alpha);
    double prev_eta = INFINITY;
    double prev_clip = 0.0;
    for (std::size_t t = 1; t <= 100000; ++t) {
      const StepParams s = anytime_convex(t, any);
      ASSERT_LE(s.step_size * s.clip_level, alpha);
      ASSERT_GE(s.clip_level, 2.0 * G);
      ASSERT_LE(s.step_size, prev_eta);
      ASSERT_GE(s.clip_level, prev_clip);
      prev_eta = s.step_size;
      prev_clip = s.clip_level;
    }
    const std::size_t T = 1 + static_cast<std::size_t>(unit(rng) * 1e6);
    const StepParams f = fixed_convex(T / 2 + 1, convex(ScheduleKind::FixedConvex, G, M, p, alpha, T));
    EXPECT_LE(f.step_size * f.clip_level, alpha);
    EXPECT_GE(f.clip_level, 2.0 * G);
  }
}

TEST(Audit, Examples) {
  const ScheduleAudit a = schedule_audit(convex(ScheduleKind::AnytimeConvex, 1.0, 1.0, 2.0, 1.0), 10000);
  EXPECT_EQ(a.status, ScheduleAudit::Status::Pass);
  EXPECT_LE(a.max_eta_m, 1.0);
  EXPECT_GE(a.max_eta_m, 1.0 - 1e-15);
  EXPECT_EQ(a.bound, 1.0);

  const ScheduleAudit f = schedule_audit(convex(ScheduleKind::FixedConvex, 1.0, 2.0, 1.5, 0.5), 1000);
  EXPECT_EQ(f.status, ScheduleAudit::Status::Pass);
  EXPECT_EQ(f.min_eta_m, f.max_eta_m);
  const double clip_T = std::max(2.0, 2.0 * std::pow(1000.0, 1.0 / 1.5));
  EXPECT_NEAR(f.max_eta_m, std::min(clip_T * 0.5 / std::sqrt(1000.0), 0.5), 1e-15);

  ScheduleSpec strong = convex(ScheduleKind::StronglyConvex, 1.0, 1.0, 1.5, 1.0);
  strong.mu = 1.0;
  EXPECT_EQ(schedule_audit(strong, 100).status, ScheduleAudit::Status::NotApplicable);

  const ScheduleAudit d = schedule_audit(dog_spec(1.0, 3.0, 1.5, 0.5), 5000);
  EXPECT_EQ(d.status, ScheduleAudit::Status::Pass);
  EXPECT_LE(d.max_eta_m, d.bound);
}

TEST(Schedule, DispatchMatchesFreeFunctions) {
  ScheduleSpec s = convex(ScheduleKind::AnytimeConvex, 1.0, 2.0, 1.5, 1.0);
  Schedule schedule(s);
  const Vector x = Vector::Zero(1);
  for (std::size_t t = 1; t <= 10; ++t) {
    const StepParams a = schedule.next(t, x, x);
    const StepParams b = anytime_convex(t, s);
    EXPECT_EQ(a.step_size, b.step_size);
    EXPECT_EQ(a.clip_level, b.clip_level);
  }
  EXPECT_EQ(schedule.dog(), nullptr);
  EXPECT_THROW(Schedule(convex(ScheduleKind::FixedConvex, 1.0, 2.0, 1.5, 1.0, 0)), DomainError);
  EXPECT_EQ(schedule_kind_from_string("distance_adaptive"), ScheduleKind::DistanceAdaptive);
  EXPECT_THROW(schedule_kind_from_string("adam"), DomainError);
}
