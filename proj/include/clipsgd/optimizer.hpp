#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clipsgd/noise.hpp"
#include "clipsgd/problems.hpp"
#include "clipsgd/schedules.hpp"
#include "clipsgd/types.hpp"

namespace clipsgd {

enum class Averaging { Uniform, TWeighted, RWeighted };

std::string to_string(Averaging averaging);
Averaging averaging_from_string(const std::string& name);

struct Checkpoint {
  std::size_t t;
  double error;  ///< F(average of x_1..x_t) - F*

  bool operator==(const Checkpoint&) const = default;
};

/// Summary of one trajectory of T steps.
struct RunRecord {
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::string config_digest;

  Vector final_average;
  double final_error = 0.0;            ///< F(x̄_T) - F*
  double last_iterate_error = 0.0;     ///< F(x_{T+1}) - F*
  double last_iterate_dist_sq = 0.0;   ///< ||x_{T+1} - x*||^2
  double initial_distance = 0.0;       ///< ||x_1 - x*||
  double distance_max = 0.0;           ///< max_{t <= T+1} ||x_t - x*||

  // Distance-adaptive runs only.
  std::vector<double> r_history;       ///< r_1 .. r_{T+1}
  std::optional<std::size_t> selected_index;  ///< I(T)
  std::optional<double> selected_error;       ///< F(x̄_{I(T)}) - F*

  std::vector<Checkpoint> checkpoints;
};

/// What the loop saw at iteration t, handed to an optional observer.
struct StepTrace {
  std::size_t t;
  const Vector& x;        ///< x_t
  const Vector& gradient; ///< the estimate actually used (clipped unless disabled)
  double clip_level;
  double step_size;
};

struct RunOptions {
  Averaging averaging = Averaging::Uniform;
  /// Skipping the clip turns the loop into plain projected SGD / MD.
  bool clipping = true;
  /// Horizons (<= T) to checkpoint in addition to the powers of two.
  std::vector<std::size_t> extra_checkpoints;
  std::function<void(const StepTrace&)> observer;
};

/// Projected clipped SGD:
///   g_t = (1 ∧ M_t/||ĝ_t||) ĝ_t,  x_{t+1} = Π_X(x_t - η_t g_t).
RunRecord run_sgd(const Problem& problem, const NoiseModel& noise, Schedule& schedule,
                  std::size_t horizon, const Vector& x1, Rng& rng, const RunOptions& options = {});

/// Clipped stochastic mirror descent: clipping in the dual norm, Bregman
/// proximal step in place of the projection.
RunRecord run_md(const Problem& problem, const NoiseModel& noise, Schedule& schedule,
                 std::size_t horizon, const Vector& x1, Rng& rng, const RunOptions& options = {});

/// Smallest t in [T] maximizing sum_{s<=t} r_s / r_{t+1}; r_history holds
/// r_1..r_{T+1}.
std::size_t select_index(const std::vector<double>& r_history);

/// Powers of two up to T, merged with `extra` (entries > T dropped), sorted.
std::vector<std::size_t> checkpoint_grid(std::size_t horizon, const std::vector<std::size_t>& extra);

}  // namespace clipsgd
