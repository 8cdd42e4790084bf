#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clipsgd/noise.hpp"
#include "clipsgd/problems.hpp"
#include "clipsgd/types.hpp"

namespace clipsgd {

/// (1 ∧ M/||g||_*) g. Throws DomainError for M <= 0.
Vector clip(const Vector& g, double level, NormTag norm = NormTag::L2);

/// In-place variant used by the optimizer loops. Returns the scale factor.
double clip_in_place(Vector& g, double level, NormTag norm = NormTag::L2);

/// Empirical statistics of the clipped estimator g = clip(dF(x) + xi, M).
/// xi_u = g - mean(g) stands in for g - E[g]; xi_b = mean(g) - dF(x).
struct ClipStats {
  double mean_sq_unbiased = 0.0;   ///< mean of ||xi_u||_*^2
  double sq_standard_error = 0.0;  ///< standard error of that mean
  double bias_norm = 0.0;          ///< ||mean(g) - dF(x)||_*
  double mean_standard_error = 0.0;///< l2 standard error of mean(g)
  double max_unbiased_norm = 0.0;  ///< max ||xi_u||_*
  std::size_t samples = 0;
  double level = 0.0;
  NormTag norm = NormTag::L2;
};

struct BoundCheck {
  std::string name;
  double estimate = 0.0;
  double bound = 0.0;
  double cushion = 0.0;
  bool pass = false;
};

struct ClipReport {
  ClipStats stats;
  std::vector<BoundCheck> checks;  ///< unbiased_max, unbiased_second_moment, bias, bias_squared
  bool pass() const;
};

/// Monte Carlo check of the clipping-error bounds at a fixed point x:
///   ||xi_u||_* <= 2M,
///   E||xi_u||_*^2 <= C sigma^p M^(2-p)   (C = 10 in l2, 40 otherwise),
///   ||xi_b||_* <= 2 sigma^p M^(1-p),
///   ||xi_b||_*^2 <= 10 sigma^p M^(2-p).
/// Each empirical quantity gets a 3-standard-error cushion. Requires
/// M >= 2G (PreconditionError otherwise) and samples >= 10^4.
ClipReport verify_clip_bounds(const Problem& problem, const NoiseModel& noise, const Vector& x,
                              double level, std::size_t samples, Rng& rng);

}  // namespace clipsgd
