#include "clipsgd/optimizer.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "clipsgd/clip.hpp"

namespace clipsgd {

namespace {

using WideVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

Vector narrow(const WideVector& sum, long double weight) {
  return (sum / weight).cast<double>();
}

RunRecord run_loop(const Problem& problem, const NoiseModel& noise, Schedule& schedule,
                   std::size_t horizon, const Vector& x1, Rng& rng, const RunOptions& options,
                   bool mirror) {
  if (horizon < 1) throw DomainError("horizon T must be at least 1");
  if (x1.size() != static_cast<Eigen::Index>(problem.dimension())) {
    throw DomainError("x_1 has the wrong dimension");
  }
  if (!problem.is_feasible(x1)) throw DomainError("x_1 is not feasible");
  if (noise.dimension() != problem.dimension()) {
    throw DomainError("noise dimension does not match the problem");
  }
  DogState* dog = schedule.dog();
  if (options.averaging == Averaging::RWeighted && dog == nullptr) {
    throw DomainError("r-weighted averaging requires the distance_adaptive schedule");
  }

  const Eigen::Index d = x1.size();
  const NormTag norm = problem.norm_tag();
  const Vector& x_star = problem.x_star();
  const std::vector<std::size_t> grid = checkpoint_grid(horizon, options.extra_checkpoints);

  RunRecord record;
  record.horizon = horizon;
  record.initial_distance = (x1 - x_star).norm();
  record.distance_max = record.initial_distance;

  Vector x = x1;
  Vector grad(d);
  Vector xi(d);
  Vector g(d);

  WideVector sum = WideVector::Zero(d);
  long double weight_sum = 0.0L;

  // r-weighted prefix averages for the index selection rule.
  WideVector r_sum = WideVector::Zero(d);
  long double r_weight = 0.0L;
  double r_running = 0.0;
  double best_value = -1.0;
  std::size_t best_index = 0;
  Vector best_average;
  auto consider = [&](std::size_t index, double r_next) {
    const double value = r_running / r_next;
    if (value > best_value) {
      best_value = value;
      best_index = index;
      best_average = narrow(r_sum, r_weight);
    }
  };

  std::size_t next_checkpoint = 0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const StepParams step = schedule.next(t, x, x1);

    double r_t = 0.0;
    if (dog != nullptr) {
      r_t = dog->r_history().back();
      if (t >= 2) consider(t - 1, r_t);
      r_sum += static_cast<long double>(r_t) * x.cast<long double>();
      r_weight += r_t;
      r_running += r_t;
    }

    long double w = 1.0L;
    if (options.averaging == Averaging::TWeighted) w = static_cast<long double>(t);
    if (options.averaging == Averaging::RWeighted) w = r_t;
    sum += w * x.cast<long double>();
    weight_sum += w;

    if (next_checkpoint < grid.size() && grid[next_checkpoint] == t) {
      const Vector avg = options.averaging == Averaging::RWeighted ? narrow(r_sum, r_weight)
                                                                    : narrow(sum, weight_sum);
      record.checkpoints.push_back({t, problem.value(avg) - problem.f_star()});
      ++next_checkpoint;
    }

    problem.subgradient(x, grad);
    draw(noise, rng, xi);
    g = grad + xi;
    if (options.clipping) clip_in_place(g, step.clip_level, norm);

    if (options.observer) options.observer(StepTrace{t, x, g, step.clip_level, step.step_size});

    if (mirror) {
      problem.mirror_step(x, g, step.step_size);
    } else {
      x -= step.step_size * g;
      problem.project(x);
    }
    assert(problem.is_feasible(x, 1e-8));
    record.distance_max = std::max(record.distance_max, (x - x_star).norm());
  }

  record.final_average = narrow(sum, weight_sum);
  record.final_error = problem.value(record.final_average) - problem.f_star();
  record.last_iterate_error = problem.value(x) - problem.f_star();
  record.last_iterate_dist_sq = (x - x_star).squaredNorm();

  if (dog != nullptr) {
    consider(horizon, dog->observe(x, x1));
    record.r_history = dog->r_history();
    record.selected_index = best_index;
    record.selected_error = problem.value(best_average) - problem.f_star();
  }
  return record;
}

}  // namespace

std::string to_string(Averaging averaging) {
  switch (averaging) {
    case Averaging::Uniform: return "uniform";
    case Averaging::TWeighted: return "t_weighted";
    case Averaging::RWeighted: return "r_weighted";
  }
  return "unknown";
}

Averaging averaging_from_string(const std::string& name) {
  if (name == "uniform") return Averaging::Uniform;
  if (name == "t_weighted") return Averaging::TWeighted;
  if (name == "r_weighted") return Averaging::RWeighted;
  throw DomainError("unknown averaging rule '" + name + "'");
}

RunRecord run_sgd(const Problem& problem, const NoiseModel& noise, Schedule& schedule,
                  std::size_t horizon, const Vector& x1, Rng& rng, const RunOptions& options) {
  if (problem.geometry() != Geometry::EuclideanProjection) {
    throw DomainError("run_sgd needs a Euclidean-projection problem; use run_md for " +
                      problem.kind());
  }
  return run_loop(problem, noise, schedule, horizon, x1, rng, options, false);
}

RunRecord run_md(const Problem& problem, const NoiseModel& noise, Schedule& schedule,
                 std::size_t horizon, const Vector& x1, Rng& rng, const RunOptions& options) {
  if (problem.geometry() != Geometry::MirrorMap) {
    throw DomainError("run_md needs a mirror-map problem; " + problem.kind() + " is Euclidean");
  }
  return run_loop(problem, noise, schedule, horizon, x1, rng, options, true);
}

std::size_t select_index(const std::vector<double>& r_history) {
  if (r_history.size() < 2) throw DomainError("r_history must hold r_1..r_{T+1} with T >= 1");
  const std::size_t horizon = r_history.size() - 1;
  double running = 0.0;
  double best_value = -1.0;
  std::size_t best = 0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    running += r_history[t - 1];
    const double value = running / r_history[t];
    if (value > best_value) {
      best_value = value;
      best = t;
    }
  }
  return best;
}

std::vector<std::size_t> checkpoint_grid(std::size_t horizon, const std::vector<std::size_t>& extra) {
  std::vector<std::size_t> grid;
  for (std::size_t t = 1; t <= horizon; t *= 2) {
    grid.push_back(t);
    if (t > horizon / 2) break;
  }
  for (std::size_t t : extra) {
    if (t >= 1 && t <= horizon) grid.push_back(t);
  }
  grid.push_back(horizon);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

}  // namespace clipsgd
