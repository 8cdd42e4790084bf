#include "clipsgd/clip.hpp"

#include <algorithm>
#include <cmath>

namespace clipsgd {

double clip_in_place(Vector& g, double level, NormTag norm) {
  if (!(level > 0.0)) throw DomainError("clip level must be positive");
  const double n = dual_norm(g, norm);
  if (n <= level) return 1.0;
  const double scale = level / n;
  g *= scale;
  // Rounding in the product can leave the norm a few ulps above the level.
  while (dual_norm(g, norm) > level) g *= std::nextafter(1.0, 0.0);
  return scale;
}

Vector clip(const Vector& g, double level, NormTag norm) {
  Vector out = g;
  clip_in_place(out, level, norm);
  return out;
}

bool ClipReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
}

ClipReport verify_clip_bounds(const Problem& problem, const NoiseModel& noise, const Vector& x,
                              double level, std::size_t samples, Rng& rng) {
  const double G = problem.lipschitz();
  if (level < 2.0 * G) {
    throw PreconditionError("clip level M must be at least 2G for the clipping-error bounds");
  }
  if (samples < 10000) throw PreconditionError("at least 10^4 samples are required");
  if (noise.dimension() != problem.dimension()) {
    throw DomainError("noise dimension does not match the problem");
  }

  const NormTag norm = problem.norm_tag();
  const Vector grad = problem.subgradient(x);
  const Rng start = rng;

  Vector xi;
  Vector g(grad.size());
  auto next_clipped = [&](Rng& stream) {
    draw(noise, stream, xi);
    g = grad + xi;
    clip_in_place(g, level, norm);
  };

  // Pass 1: mean of the clipped estimator.
  Vector mean = Vector::Zero(grad.size());
  for (std::size_t n = 1; n <= samples; ++n) {
    next_clipped(rng);
    mean += (g - mean) / static_cast<double>(n);
  }

  // Pass 2: regenerate the same draws and measure deviations from the mean.
  Rng replay = start;
  double sq_mean = 0.0;
  double sq_m2 = 0.0;
  double l2_sq_mean = 0.0;
  double max_norm = 0.0;
  for (std::size_t n = 1; n <= samples; ++n) {
    next_clipped(replay);
    const Vector dev = g - mean;
    const double dn = dual_norm(dev, norm);
    const double sq = dn * dn;
    max_norm = std::max(max_norm, dn);
    const double delta = sq - sq_mean;
    sq_mean += delta / static_cast<double>(n);
    sq_m2 += delta * (sq - sq_mean);
    l2_sq_mean += (dev.squaredNorm() - l2_sq_mean) / static_cast<double>(n);
  }

  const double count = static_cast<double>(samples);
  ClipStats stats;
  stats.samples = samples;
  stats.level = level;
  stats.norm = norm;
  stats.mean_sq_unbiased = sq_mean;
  stats.sq_standard_error = std::sqrt(sq_m2 / (count - 1.0) / count);
  stats.mean_standard_error = std::sqrt(l2_sq_mean / count);
  stats.bias_norm = dual_norm(mean - grad, norm);
  stats.max_unbiased_norm = max_norm;

  const double p = noise.p();
  const double sigma_p = std::pow(noise.sigma(), p);
  const double second_const = norm == NormTag::L2 ? 10.0 : 40.0;
  const double se = stats.mean_standard_error;

  ClipReport report;
  report.stats = stats;

  auto add = [&](std::string name, double estimate, double bound, double cushion) {
    report.checks.push_back(
        BoundCheck{std::move(name), estimate, bound, cushion, estimate <= bound + cushion});
  };
  add("unbiased_max", stats.max_unbiased_norm, 2.0 * level, 3.0 * se);
  add("unbiased_second_moment", stats.mean_sq_unbiased,
      second_const * sigma_p * std::pow(level, 2.0 - p), 3.0 * stats.sq_standard_error);
  add("bias", stats.bias_norm, 2.0 * sigma_p * std::pow(level, 1.0 - p), 3.0 * se);
  const double sq_bound = 10.0 * sigma_p * std::pow(level, 2.0 - p);
  const double widened = std::sqrt(sq_bound) + 3.0 * se;
  add("bias_squared", stats.bias_norm * stats.bias_norm, sq_bound, widened * widened - sq_bound);
  return report;
}

}  // namespace clipsgd
