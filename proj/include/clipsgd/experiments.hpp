#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "clipsgd/noise.hpp"
#include "clipsgd/optimizer.hpp"
#include "clipsgd/problems.hpp"
#include "clipsgd/schedules.hpp"

namespace clipsgd {

/// Malformed experiment configuration. `key` is the dotted path of the
/// offending entry; `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, int line, const std::string& message);
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

enum class ProblemKind { DistanceCone, StronglyConvexBall, SimplexLinear };

std::string to_string(ProblemKind kind);

struct ProblemConfig {
  ProblemKind kind = ProblemKind::DistanceCone;
  std::size_t dimension = 1;
  double G = 1.0;                     ///< distance_cone slope
  double mu = 0.0;                    ///< strongly_convex_ball modulus
  std::optional<double> radius;
  std::vector<double> x_star;         ///< explicit minimizer (origin when empty)
  std::optional<std::uint64_t> x_star_seed;  ///< random direction of norm x_star_norm
  double x_star_norm = 0.0;
  std::vector<double> start;          ///< explicit x_1
  std::optional<double> start_distance;      ///< x_1 = x_star + distance * u
  std::uint64_t start_seed = 1;
  std::vector<double> cost;           ///< simplex_linear cost
  std::optional<std::uint64_t> cost_seed;    ///< uniform [0, 1) costs

  bool operator==(const ProblemConfig&) const = default;
};

struct NoiseConfig {
  NoiseFamily family = NoiseFamily::Zero;
  double p = 2.0;
  double sigma = 0.0;
  std::optional<double> shape;

  bool operator==(const NoiseConfig&) const = default;
};

/// Schedule section as written. Unset constants are taken from the problem
/// (G, mu) and the noise model (p, sigma) when the experiment is built.
struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::AnytimeConvex;
  std::optional<double> G;
  std::optional<double> p;
  double M = 0.0;
  std::optional<double> alpha;
  std::optional<double> beta;
  double delta = 0.05;
  std::optional<double> mu;
  std::optional<double> sigma;
  double r = 1.0;
  WeightFamily weights;

  bool operator==(const ScheduleConfig&) const = default;
};

struct Aggregation {
  enum class Kind { Median, Mean, Quantile };
  Kind kind = Kind::Median;
  double q = 0.5;

  bool operator==(const Aggregation&) const = default;
};

std::string to_string(const Aggregation& aggregation);
Aggregation aggregation_from_string(const std::string& text);

struct SweepConfig {
  std::vector<std::size_t> horizons;
  std::vector<std::uint64_t> seeds;
  std::uint64_t master_seed = 0;
  std::optional<Averaging> averaging;  ///< default follows the schedule kind
  Aggregation aggregation;
  std::vector<double> quantiles;
  std::string output = "results";

  bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
  ProblemConfig problem;
  NoiseConfig noise;
  ScheduleConfig schedule;
  SweepConfig sweep;

  bool operator==(const ExperimentConfig&) const = default;

  /// Checks every invariant; throws ConfigError naming the field.
  void validate() const;
};

/// Parses a YAML (or JSON) key/value tree. Unknown keys and missing
/// required keys are rejected with the key path and line number.
/// `overrides` are "section.key=value" assignments applied before
/// validation, so flags take precedence over file values.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config(const std::string& text,
                              const std::vector<std::string>& overrides = {});

/// Canonical JSON echo; `parse_config` reads it back to an equal config.
std::string config_to_json(const ExperimentConfig& config);
void write_config_echo(const ExperimentConfig& config, const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_digest(const ExperimentConfig& config);

/// A config resolved into runnable objects.
struct Experiment {
  ProblemPtr problem;
  NoiseModel noise;
  ScheduleSpec schedule;
  Averaging averaging;
  Vector x1;
  std::string digest;

  bool mirror() const { return problem->geometry() == Geometry::MirrorMap; }
};

Experiment build_experiment(const ExperimentConfig& config);

/// One run of horizon T on the stream derived from (master_seed, seed).
RunRecord run_single(const Experiment& experiment, std::size_t horizon, std::uint64_t master_seed,
                     std::uint64_t seed, const std::vector<std::size_t>& extra_checkpoints = {});

enum class ErrorMetric { FinalAverage, Selected };

/// Selected for distance-adaptive schedules, FinalAverage otherwise.
ErrorMetric default_metric(ScheduleKind kind);
double record_error(const RunRecord& record, ErrorMetric metric);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
  Aggregation aggregation;
  std::vector<std::size_t> horizons;          ///< used in the fit
  std::vector<double> aggregated;             ///< error per used horizon
  std::vector<std::size_t> dropped_horizons;
};

/// Regime constants for dropping small horizons where the G/sqrt(T) term of
/// the rate bound dominates the noise term M T^((1-p)/p).
struct RegimeHint {
  double G;
  double M;
  double p;
  bool strongly_convex = false;
};

/// Least squares of ln(aggregated error) on ln(T). Errors are floored at
/// 1e-15 before the logarithm.
RateFit fit_rate(const std::vector<RunRecord>& records, const Aggregation& aggregation,
                 const std::optional<RegimeHint>& hint = std::nullopt,
                 ErrorMetric metric = ErrorMetric::FinalAverage);

/// Order-statistic quantile with lower interpolation (index floor(q (n-1)))
/// of the error across seeds at each horizon. Needs >= 20 runs per horizon.
std::vector<std::pair<std::size_t, double>> quantile_errors(
    const std::vector<RunRecord>& records, double q,
    ErrorMetric metric = ErrorMetric::FinalAverage);

double aggregate(std::vector<double> values, const Aggregation& aggregation);

struct SweepOptions {
  std::size_t jobs = 1;
  std::optional<std::filesystem::path> output_dir;  ///< overrides sweep.output
  bool persist = true;
  bool log_progress = false;
  bool keep_r_history = false;  ///< T + 1 doubles per record
};

struct SweepResult {
  std::vector<RunRecord> records;  ///< ordered by (horizon, seed) as configured
  std::optional<RateFit> fit;      ///< absent when fewer than 3 horizons
  std::vector<std::pair<double, std::vector<std::pair<std::size_t, double>>>> quantiles;
  std::filesystem::path output_dir;
};

/// Runs every (T, seed) pair. Output depends only on the config: each seed
/// owns the stream make_stream(master_seed, seed), and records are written
/// in configuration order by a single writer regardless of `jobs`.
SweepResult run_sweep(const ExperimentConfig& config, const SweepOptions& options = {});

// Persistence.
std::vector<std::string> results_columns(const std::vector<std::size_t>& checkpoint_ts);
std::string results_row(const RunRecord& record, const std::vector<std::size_t>& checkpoint_ts);
void write_results(const std::vector<RunRecord>& records, const std::filesystem::path& csv_path);
std::vector<RunRecord> read_results(const std::filesystem::path& csv_path);
std::string fits_to_json(const SweepResult& result);
std::string run_record_to_json(const RunRecord& record);
std::string format_double(double value);

}  // namespace clipsgd
