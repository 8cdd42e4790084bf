#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "clipsgd/types.hpp"

namespace clipsgd {

enum class ScheduleKind { AnytimeConvex, FixedConvex, StronglyConvex, DistanceAdaptive };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Weight sequence w_t for the distance-adaptive schedule. LogSquared is
/// 1 + ln^2 t; IteratedLog(n, eps) is [y^(n+1)(t)]^(1+eps) prod_{i<=n} y^(i)(t)
/// with y(t) = 1 + ln t.
struct WeightFamily {
  enum class Kind { LogSquared, IteratedLog };
  Kind kind = Kind::LogSquared;
  int depth = 0;         ///< n, IteratedLog only
  double epsilon = 1.0;  ///< IteratedLog only

  bool operator==(const WeightFamily&) const = default;
};

struct WeightValue {
  double w;
  double total;  ///< W, an upper bound on sum_t 1/(t w_t)
};

WeightValue w_sequence(std::size_t t, const WeightFamily& family);

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::AnytimeConvex;
  double G = 1.0;
  double p = 2.0;
  double M = 0.0;  ///< 0 selects the sigma-free clip level 2G
  std::optional<double> alpha;
  std::optional<double> beta;  ///< with delta: alpha = beta / ln(4/delta)
  double delta = 0.05;
  std::size_t horizon = 0;  ///< FixedConvex only
  double mu = 0.0;          ///< StronglyConvex only
  double sigma = 0.0;       ///< DistanceAdaptive only
  double r = 1.0;           ///< DistanceAdaptive only
  WeightFamily weights;     ///< DistanceAdaptive only

  bool operator==(const ScheduleSpec&) const = default;

  /// Step scale: `alpha` when set, otherwise beta / ln(4/delta).
  double resolved_alpha() const;
  /// Throws DomainError naming the offending field.
  void validate() const;
};

struct StepParams {
  double clip_level;
  double step_size;
};

StepParams anytime_convex(std::size_t t, const ScheduleSpec& spec);
StepParams fixed_convex(std::size_t t, const ScheduleSpec& spec);
StepParams strongly_convex(std::size_t t, const ScheduleSpec& spec);

struct DogConstants {
  double alpha1;
  double alpha2;
};

DogConstants dog_constants(double W, double delta);

/// Running state of the distance-adaptive schedule for one trajectory.
/// r_t = max(r_{t-1}, ||x_1 - x_t||, r); r_history[0] = r.
class DogState {
 public:
  explicit DogState(const ScheduleSpec& spec);

  /// Step parameters for iteration t (must equal previous t + 1, starting
  /// at 1). `x_t` is the iterate before the step.
  StepParams step(std::size_t t, const Vector& x_t, const Vector& x_1);

  /// Appends r_{T+1} after the final step so the selection rule can use it.
  double observe(const Vector& x_next, const Vector& x_1);

  std::size_t t() const { return t_; }
  double r_bar() const { return r_bar_; }
  const std::vector<double>& r_history() const { return r_history_; }
  const DogConstants& constants() const { return constants_; }
  double W() const { return W_; }

 private:
  ScheduleSpec spec_;
  DogConstants constants_{};
  double W_ = 0.0;
  double log_term_ = 0.0;
  double r_bar_ = 0.0;
  std::size_t t_ = 0;
  std::vector<double> r_history_;
};

/// One schedule instance for one run.
class Schedule {
 public:
  explicit Schedule(ScheduleSpec spec);

  StepParams next(std::size_t t, const Vector& x_t, const Vector& x_1);
  const ScheduleSpec& spec() const { return spec_; }
  DogState* dog() { return dog_ ? &*dog_ : nullptr; }
  const DogState* dog() const { return dog_ ? &*dog_ : nullptr; }

 private:
  ScheduleSpec spec_;
  std::optional<DogState> dog_;
};

struct ScheduleAudit {
  enum class Status { Pass, Fail, NotApplicable };
  Status status = Status::NotApplicable;
  std::size_t horizon = 0;
  double bound = 0.0;  ///< alpha, or r * alpha2 for the adaptive schedule
  double min_eta_m = 0.0;
  double max_eta_m = 0.0;
  double min_eta = 0.0;
  double max_eta = 0.0;
  double min_clip = 0.0;
  double max_clip = 0.0;
  bool product_bounded = true;  ///< eta_t M_t <= bound for every t
  bool clip_floor = true;       ///< M_t >= 2G for every t
  bool eta_nonincreasing = true;
  bool clip_nondecreasing = true;
  std::string detail;
};

std::string to_string(ScheduleAudit::Status status);

/// Scans t = 1..T. The adaptive schedule is audited on a stationary
/// trajectory (r_t = r).
ScheduleAudit schedule_audit(const ScheduleSpec& spec, std::size_t horizon);

}  // namespace clipsgd
