#include "clipsgd/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace clipsgd {

namespace {

// Largest eta' <= eta with eta' * clip_level <= bound, so the product bound
// holds in floating point and not only in exact arithmetic.
double cap_product(double eta, double clip_level, double bound) {
  while (eta * clip_level > bound) eta = std::nextafter(eta, 0.0);
  return eta;
}

double clip_level_for(double G, double M, double p, double tau) {
  return std::max(2.0 * G, M * std::pow(tau, 1.0 / p));
}

void require_step_index(std::size_t t) {
  if (t == 0) throw DomainError("iteration index t starts at 1");
}

}  // namespace

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::AnytimeConvex: return "anytime_convex";
    case ScheduleKind::FixedConvex: return "fixed_convex";
    case ScheduleKind::StronglyConvex: return "strongly_convex";
    case ScheduleKind::DistanceAdaptive: return "distance_adaptive";
  }
  return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "anytime_convex") return ScheduleKind::AnytimeConvex;
  if (name == "fixed_convex") return ScheduleKind::FixedConvex;
  if (name == "strongly_convex") return ScheduleKind::StronglyConvex;
  if (name == "distance_adaptive") return ScheduleKind::DistanceAdaptive;
  throw DomainError("unknown schedule kind '" + name + "'");
}

WeightValue w_sequence(std::size_t t, const WeightFamily& family) {
  require_step_index(t);
  const double log_t = std::log(static_cast<double>(t));
  if (family.kind == WeightFamily::Kind::LogSquared) {
    return {1.0 + log_t * log_t, 1.0 + std::numbers::pi / 2.0};
  }
  if (!(family.epsilon > 0.0)) throw DomainError("iterated-log epsilon must be positive");
  if (family.depth < 0) throw DomainError("iterated-log depth must be nonnegative");
  double y = 1.0 + log_t;  // y^(1)(t)
  double product = 1.0;
  for (int i = 1; i <= family.depth; ++i) {
    product *= y;
    y = 1.0 + std::log(y);
  }
  return {std::pow(y, 1.0 + family.epsilon) * product, 1.0 + 1.0 / family.epsilon};
}

double ScheduleSpec::resolved_alpha() const {
  if (alpha) return *alpha;
  if (beta) {
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("schedule.delta must lie in (0, 1)");
    return *beta / std::log(4.0 / delta);
  }
  throw DomainError("schedule needs either alpha or beta");
}

void ScheduleSpec::validate() const {
  if (!(G > 0.0)) throw DomainError("schedule.G must be positive");
  if (!(p > 1.0 && p <= 2.0)) throw DomainError("schedule.p must lie in (1, 2]");
  if (!(M >= 0.0)) throw DomainError("schedule.M must be nonnegative");
  switch (kind) {
    case ScheduleKind::AnytimeConvex:
    case ScheduleKind::FixedConvex:
      if (!(resolved_alpha() > 0.0)) throw DomainError("schedule.alpha must be positive");
      break;
    case ScheduleKind::StronglyConvex:
      if (!(mu > 0.0)) throw DomainError("schedule.mu must be positive");
      break;
    case ScheduleKind::DistanceAdaptive:
      if (!(r > 0.0)) throw DomainError("schedule.r must be positive");
      if (!(delta > 0.0 && delta < 1.0)) throw DomainError("schedule.delta must lie in (0, 1)");
      if (!(sigma >= 0.0)) throw DomainError("schedule.sigma must be nonnegative");
      if (weights.kind == WeightFamily::Kind::IteratedLog &&
          (!(weights.epsilon > 0.0) || weights.depth < 0)) {
        throw DomainError("schedule.weights needs epsilon > 0 and depth >= 0");
      }
      break;
  }
}

StepParams anytime_convex(std::size_t t, const ScheduleSpec& spec) {
  require_step_index(t);
  const double alpha = spec.resolved_alpha();
  const double tau = static_cast<double>(t);
  const double clip_level = clip_level_for(spec.G, spec.M, spec.p, tau);
  const double eta = std::min(alpha / (spec.G * std::sqrt(tau)), alpha / clip_level);
  return {clip_level, cap_product(eta, clip_level, alpha)};
}

StepParams fixed_convex(std::size_t t, const ScheduleSpec& spec) {
  require_step_index(t);
  if (spec.horizon == 0) throw DomainError("fixed-horizon schedule needs horizon T >= 1");
  if (t > spec.horizon) throw DomainError("iteration exceeds the fixed horizon T");
  const double alpha = spec.resolved_alpha();
  const double horizon = static_cast<double>(spec.horizon);
  const double clip_level = clip_level_for(spec.G, spec.M, spec.p, horizon);
  const double eta = std::min(alpha / (spec.G * std::sqrt(horizon)), alpha / clip_level);
  return {clip_level, cap_product(eta, clip_level, alpha)};
}

StepParams strongly_convex(std::size_t t, const ScheduleSpec& spec) {
  require_step_index(t);
  if (!(spec.mu > 0.0)) throw DomainError("strongly convex schedule needs mu > 0");
  const double tau = static_cast<double>(t);
  return {clip_level_for(spec.G, spec.M, spec.p, tau), 4.0 / (spec.mu * (tau + 1.0))};
}

DogConstants dog_constants(double W, double delta) {
  if (!(W > 0.0) || !std::isfinite(W)) throw DomainError("W must be positive and finite");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  const double log_term = std::log(4.0 / delta);
  const double root = std::sqrt(5.0 * W);
  const double first = 1.0 / (8.0 * (16.0 / 3.0 + 8.0 * root + 4.0 * W) * log_term);
  const double second = 1.0 / std::sqrt(16.0 * (32.0 / 3.0 + 8.0 * root + 80.0 * W) * log_term);
  return {1.0 / std::sqrt(32.0 * W), std::min(first, second)};
}

DogState::DogState(const ScheduleSpec& spec) : spec_(spec) {
  if (spec_.kind != ScheduleKind::DistanceAdaptive) {
    throw DomainError("DogState requires a distance_adaptive schedule");
  }
  spec_.validate();
  W_ = w_sequence(1, spec_.weights).total;
  constants_ = dog_constants(W_, spec_.delta);
  log_term_ = std::log(4.0 / spec_.delta);
  r_bar_ = spec_.r;
}

StepParams DogState::step(std::size_t t, const Vector& x_t, const Vector& x_1) {
  if (t != t_ + 1 || r_history_.size() != t_) {
    throw SequenceError("distance-adaptive schedule must be stepped with t = 1, 2, ...");
  }
  t_ = t;
  r_bar_ = std::max({r_bar_, (x_1 - x_t).norm(), spec_.r});
  r_history_.push_back(r_bar_);

  const double tau = static_cast<double>(t);
  const double tw = tau * w_sequence(t, spec_.weights).w;
  const double clip_level =
      std::max(2.0 * spec_.G, spec_.sigma * std::pow(tw / log_term_, 1.0 / spec_.p));
  const double gamma = std::min(constants_.alpha1 / (spec_.G * std::sqrt(tw)),
                                constants_.alpha2 / clip_level);
  const double eta = cap_product(r_bar_ * gamma, clip_level, r_bar_ * constants_.alpha2);
  return {clip_level, eta};
}

double DogState::observe(const Vector& x_next, const Vector& x_1) {
  if (r_history_.size() != t_) throw SequenceError("r_{T+1} already recorded");
  r_bar_ = std::max({r_bar_, (x_1 - x_next).norm(), spec_.r});
  r_history_.push_back(r_bar_);
  return r_bar_;
}

Schedule::Schedule(ScheduleSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind == ScheduleKind::FixedConvex && spec_.horizon == 0) {
    throw DomainError("fixed-horizon schedule needs horizon T >= 1");
  }
  if (spec_.kind == ScheduleKind::DistanceAdaptive) dog_.emplace(spec_);
}

StepParams Schedule::next(std::size_t t, const Vector& x_t, const Vector& x_1) {
  switch (spec_.kind) {
    case ScheduleKind::AnytimeConvex: return anytime_convex(t, spec_);
    case ScheduleKind::FixedConvex: return fixed_convex(t, spec_);
    case ScheduleKind::StronglyConvex: return strongly_convex(t, spec_);
    case ScheduleKind::DistanceAdaptive: return dog_->step(t, x_t, x_1);
  }
  throw DomainError("unknown schedule kind");
}

std::string to_string(ScheduleAudit::Status status) {
  switch (status) {
    case ScheduleAudit::Status::Pass: return "pass";
    case ScheduleAudit::Status::Fail: return "fail";
    case ScheduleAudit::Status::NotApplicable: return "not_applicable";
  }
  return "unknown";
}

ScheduleAudit schedule_audit(const ScheduleSpec& spec, std::size_t horizon) {
  ScheduleAudit audit;
  audit.horizon = horizon;
  if (spec.kind == ScheduleKind::StronglyConvex) {
    audit.detail = "step-size product bound applies to convex schedules only (mu = 0)";
    return audit;
  }
  if (horizon == 0) throw DomainError("audit horizon must be at least 1");

  ScheduleSpec local = spec;
  if (local.kind == ScheduleKind::FixedConvex) local.horizon = horizon;
  Schedule schedule(local);
  const Vector origin = Vector::Zero(1);

  audit.bound = local.kind == ScheduleKind::DistanceAdaptive
                    ? local.r * schedule.dog()->constants().alpha2
                    : local.resolved_alpha();
  constexpr double inf = std::numeric_limits<double>::infinity();
  audit.min_eta_m = audit.min_eta = audit.min_clip = inf;
  audit.max_eta_m = audit.max_eta = audit.max_clip = -inf;

  double prev_eta = inf;
  double prev_clip = -inf;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const StepParams s = schedule.next(t, origin, origin);
    const double product = s.step_size * s.clip_level;
    audit.min_eta_m = std::min(audit.min_eta_m, product);
    audit.max_eta_m = std::max(audit.max_eta_m, product);
    audit.min_eta = std::min(audit.min_eta, s.step_size);
    audit.max_eta = std::max(audit.max_eta, s.step_size);
    audit.min_clip = std::min(audit.min_clip, s.clip_level);
    audit.max_clip = std::max(audit.max_clip, s.clip_level);
    audit.product_bounded = audit.product_bounded && product <= audit.bound;
    audit.clip_floor = audit.clip_floor && s.clip_level >= 2.0 * local.G;
    audit.eta_nonincreasing = audit.eta_nonincreasing && s.step_size <= prev_eta;
    audit.clip_nondecreasing = audit.clip_nondecreasing && s.clip_level >= prev_clip;
    prev_eta = s.step_size;
    prev_clip = s.clip_level;
  }

  bool ok = audit.product_bounded && audit.clip_floor;
  if (local.kind != ScheduleKind::DistanceAdaptive) {
    ok = ok && audit.eta_nonincreasing && audit.clip_nondecreasing;
  }
  audit.status = ok ? ScheduleAudit::Status::Pass : ScheduleAudit::Status::Fail;
  return audit;
}

}  // namespace clipsgd
