#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "clipsgd/experiments.hpp"

namespace clipsgd {

namespace {

constexpr double kErrorFloor = 1e-15;

std::map<std::size_t, std::vector<double>> errors_by_horizon(const std::vector<RunRecord>& records,
                                                            ErrorMetric metric) {
  std::map<std::size_t, std::vector<double>> grouped;
  for (const auto& record : records) grouped[record.horizon].push_back(record_error(record, metric));
  return grouped;
}

double order_statistic(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const auto index = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
  return values[index];
}

}  // namespace

ErrorMetric default_metric(ScheduleKind kind) {
  return kind == ScheduleKind::DistanceAdaptive ? ErrorMetric::Selected : ErrorMetric::FinalAverage;
}

double record_error(const RunRecord& record, ErrorMetric metric) {
  if (metric == ErrorMetric::Selected && record.selected_error) return *record.selected_error;
  return record.final_error;
}

double aggregate(std::vector<double> values, const Aggregation& aggregation) {
  if (values.empty()) throw DomainError("cannot aggregate an empty set of errors");
  switch (aggregation.kind) {
    case Aggregation::Kind::Mean: {
      long double sum = 0.0L;
      for (double v : values) sum += v;
      return static_cast<double>(sum / static_cast<long double>(values.size()));
    }
    case Aggregation::Kind::Median: {
      std::sort(values.begin(), values.end());
      const std::size_t n = values.size();
      return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    }
    case Aggregation::Kind::Quantile:
      if (!(aggregation.q >= 0.0 && aggregation.q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
      return order_statistic(std::move(values), aggregation.q);
  }
  throw DomainError("unknown aggregation");
}

RateFit fit_rate(const std::vector<RunRecord>& records, const Aggregation& aggregation,
                 const std::optional<RegimeHint>& hint, ErrorMetric metric) {
  const auto grouped = errors_by_horizon(records, metric);
  if (grouped.size() < 3) throw DomainError("rate fit needs at least 3 distinct horizons");

  RateFit fit;
  fit.aggregation = aggregation;
  std::vector<std::pair<std::size_t, double>> points;
  for (const auto& [horizon, errors] : grouped) {
    const double value = aggregate(errors, aggregation);
    if (std::isnan(value)) throw DomainError("aggregated error is NaN at T = " + std::to_string(horizon));
    points.emplace_back(horizon, std::max(value, kErrorFloor));
  }

  // Drop leading horizons where the G/sqrt(T) term still dominates the noise
  // term, keeping at least three points.
  if (hint && !hint->strongly_convex) {
    while (points.size() > 3) {
      const double T = static_cast<double>(points.front().first);
      const double deterministic = hint->G / std::sqrt(T);
      const double noise = hint->M * std::pow(T, (1.0 - hint->p) / hint->p);
      if (deterministic <= noise) break;
      fit.dropped_horizons.push_back(points.front().first);
      points.erase(points.begin());
    }
  }

  const double n = static_cast<double>(points.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto& [T, e] : points) {
    mean_x += std::log(static_cast<double>(T));
    mean_y += std::log(e);
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& [T, e] : points) {
    const double dx = std::log(static_cast<double>(T)) - mean_x;
    const double dy = std::log(e) - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  const double residual = std::max(0.0, syy - fit.slope * sxy);
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - residual / syy, 0.0, 1.0) : 1.0;
  fit.n_points = points.size();
  for (const auto& [T, e] : points) {
    fit.horizons.push_back(T);
    fit.aggregated.push_back(e);
  }
  return fit;
}

std::vector<std::pair<std::size_t, double>> quantile_errors(const std::vector<RunRecord>& records, double q,
                                                            ErrorMetric metric) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& [horizon, errors] : errors_by_horizon(records, metric)) {
    if (errors.size() < 20) {
      throw DomainError("quantile at T = " + std::to_string(horizon) + " needs at least 20 runs, got " +
                        std::to_string(errors.size()));
    }
    out.emplace_back(horizon, order_statistic(errors, q));
  }
  return out;
}

SweepResult run_sweep(const ExperimentConfig& config, const SweepOptions& options) {
  const Experiment experiment = build_experiment(config);
  const SweepConfig& sweep = config.sweep;

  SweepResult result;
  result.output_dir = options.output_dir.value_or(std::filesystem::path(sweep.output));

  struct Task {
    std::size_t horizon;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t T : sweep.horizons) {
    for (std::uint64_t seed : sweep.seeds) tasks.push_back({T, seed});
  }
  const std::vector<std::size_t> columns = checkpoint_grid(sweep.horizons.back(), sweep.horizons);

  const std::filesystem::path csv_path = result.output_dir / "results.csv";
  const std::filesystem::path partial_path = result.output_dir / "PARTIAL";
  std::ofstream csv;
  if (options.persist) {
    std::error_code ec;
    std::filesystem::create_directories(result.output_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + result.output_dir.string() + ": " + ec.message());
    write_config_echo(config, result.output_dir / "config_echo.json");
    std::filesystem::remove(partial_path, ec);
    csv.open(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    const auto header = results_columns(columns);
    for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
    csv << '\n';
  }

  std::vector<std::optional<RunRecord>> slots(tasks.size());
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<std::size_t> next_task{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next_task.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        RunRecord record = run_single(experiment, tasks[i].horizon, sweep.master_seed, tasks[i].seed,
                                      sweep.horizons);
        if (!options.keep_r_history) std::vector<double>().swap(record.r_history);
        std::lock_guard lock(mutex);
        slots[i] = std::move(record);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        abort.store(true);
      }
      ready.notify_all();
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);

  // Single writer: rows leave in configuration order whatever the finish order.
  std::size_t written = 0;
  while (written < tasks.size()) {
    std::unique_lock lock(mutex);
    ready.wait(lock, [&] { return slots[written].has_value() || failure; });
    if (!slots[written]) break;
    RunRecord record = std::move(*slots[written]);
    slots[written].reset();
    lock.unlock();
    if (options.persist) {
      csv << results_row(record, columns) << '\n';
      csv.flush();
      if (!csv) {
        abort.store(true);
        for (auto& thread : pool) thread.join();
        throw std::runtime_error("write failed for " + csv_path.string());
      }
    }
    if (options.log_progress) {
      std::fprintf(stderr, "[%zu/%zu] T=%zu seed=%llu error=%s\n", written + 1, tasks.size(), record.horizon,
                   static_cast<unsigned long long>(record.seed), format_double(record_error(record, default_metric(experiment.schedule.kind))).c_str());
    }
    result.records.push_back(std::move(record));
    ++written;
  }
  for (auto& thread : pool) thread.join();

  if (failure) {
    if (options.persist) {
      csv.close();
      std::ofstream marker(partial_path);
      marker << "sweep aborted after " << written << " of " << tasks.size() << " runs\n";
    }
    std::rethrow_exception(failure);
  }

  const ErrorMetric metric = default_metric(experiment.schedule.kind);
  if (sweep.horizons.size() >= 3) {
    const double noise_level = experiment.schedule.M > 0.0 ? experiment.schedule.M : experiment.noise.sigma();
    const RegimeHint hint{experiment.schedule.G, noise_level, experiment.schedule.p,
                          experiment.schedule.kind == ScheduleKind::StronglyConvex};
    result.fit = fit_rate(result.records, sweep.aggregation, hint, metric);
  }
  if (sweep.seeds.size() >= 20) {
    for (double q : sweep.quantiles) result.quantiles.emplace_back(q, quantile_errors(result.records, q, metric));
  }

  if (options.persist) {
    csv.close();
    const std::filesystem::path fits_path = result.output_dir / "fits.json";
    std::ofstream fits(fits_path, std::ios::binary | std::ios::trunc);
    if (!fits) throw std::runtime_error("cannot write " + fits_path.string());
    fits << fits_to_json(result) << '\n';
  }
  return result;
}

}  // namespace clipsgd
