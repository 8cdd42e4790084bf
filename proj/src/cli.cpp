#include "clipsgd/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "clipsgd/clip.hpp"
#include "clipsgd/experiments.hpp"

namespace clipsgd {

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailure = 2;

struct ConfigFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  std::optional<std::uint64_t> master_seed;
};

void add_config_flags(CLI::App* app, ConfigFlags& flags) {
  app->add_option("--config", flags.config, "experiment config file (YAML or JSON)")->required();
  app->add_option("--set", flags.overrides,
                  "override a config entry, e.g. --set noise.sigma=4 (repeatable; wins over the file)");
  app->add_option("--output", flags.output,
                  "output directory (default: $CLIPSGD_OUTPUT_DIR, else sweep.output from the config)");
  app->add_option("--master-seed", flags.master_seed,
                  "master seed for the per-seed generator streams (default: sweep.master_seed)");
}

ExperimentConfig load_with_flags(const ConfigFlags& flags) {
  std::vector<std::string> overrides = flags.overrides;
  if (flags.master_seed) overrides.push_back("sweep.master_seed=" + std::to_string(*flags.master_seed));
  return load_config(flags.config, overrides);
}

std::filesystem::path output_dir(const ConfigFlags& flags, const ExperimentConfig& config) {
  if (!flags.output.empty()) return flags.output;
  if (const char* env = std::getenv("CLIPSGD_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return config.sweep.output;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int command_run(const ConfigFlags& flags, std::optional<std::size_t> horizon, std::optional<std::uint64_t> seed) {
  const ExperimentConfig config = load_with_flags(flags);
  const std::size_t T = horizon.value_or(config.sweep.horizons.back());
  if (T < 1) throw ConfigError("--T", 0, "horizon must be at least 1");
  const std::uint64_t s = seed.value_or(config.sweep.seeds.front());
  const Experiment experiment = build_experiment(config);

  const auto start = std::chrono::steady_clock::now();
  const RunRecord record = run_single(experiment, T, config.sweep.master_seed, s, config.sweep.horizons);
  const double elapsed = seconds_since(start);

  const std::filesystem::path dir = output_dir(flags, config);
  std::filesystem::create_directories(dir);
  write_config_echo(config, dir / "config_echo.json");
  const std::filesystem::path record_path = dir / "run_record.json";
  std::ofstream out(record_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + record_path.string());
  out << run_record_to_json(record) << '\n';

  std::printf("T=%zu seed=%llu final_error=%s elapsed=%.3fs\n", T, static_cast<unsigned long long>(s),
              format_double(record_error(record, default_metric(experiment.schedule.kind))).c_str(), elapsed);
  return kOk;
}

int command_sweep(const ConfigFlags& flags, std::size_t jobs, bool quiet) {
  const ExperimentConfig config = load_with_flags(flags);
  SweepOptions options;
  options.jobs = jobs;
  options.output_dir = output_dir(flags, config);
  options.log_progress = !quiet;
  const auto start = std::chrono::steady_clock::now();
  const SweepResult result = run_sweep(config, options);
  std::printf("runs=%zu output=%s elapsed=%.3fs\n", result.records.size(), result.output_dir.string().c_str(),
              seconds_since(start));
  if (result.fit) {
    std::printf("slope=%s intercept=%s r_squared=%s n_points=%zu aggregation=%s\n",
                format_double(result.fit->slope).c_str(), format_double(result.fit->intercept).c_str(),
                format_double(result.fit->r_squared).c_str(), result.fit->n_points,
                to_string(result.fit->aggregation).c_str());
  }
  return kOk;
}

int command_fit_rate(const std::string& results, const std::string& aggregation_text, const std::string& metric_text) {
  if (!std::filesystem::exists(results)) throw ConfigError("--results", 0, "no such file: " + results);
  Aggregation aggregation;
  try {
    aggregation = aggregation_from_string(aggregation_text);
  } catch (const DomainError& e) {
    throw ConfigError("--aggregation", 0, e.what());
  }
  const std::vector<RunRecord> records = read_results(results);
  ErrorMetric metric = ErrorMetric::FinalAverage;
  if (metric_text == "selected") {
    metric = ErrorMetric::Selected;
  } else if (metric_text == "auto") {
    const bool all_selected = !records.empty() && std::all_of(records.begin(), records.end(), [](const RunRecord& r) {
      return r.selected_error.has_value();
    });
    if (all_selected) metric = ErrorMetric::Selected;
  }
  const RateFit fit = fit_rate(records, aggregation, std::nullopt, metric);
  std::printf("slope=%s intercept=%s r_squared=%s n_points=%zu aggregation=%s\n", format_double(fit.slope).c_str(),
              format_double(fit.intercept).c_str(), format_double(fit.r_squared).c_str(), fit.n_points,
              to_string(fit.aggregation).c_str());
  for (std::size_t i = 0; i < fit.horizons.size(); ++i) {
    std::printf("T=%zu error=%s\n", fit.horizons[i], format_double(fit.aggregated[i]).c_str());
  }
  return kOk;
}

struct LemmaFlags {
  double p = 1.5;
  double sigma = 1.0;
  double G = 1.0;
  double M = 2.0;
  std::size_t N = 1000000;
  std::size_t d = 10;
  double shape = 0.0;
  std::string family = "sphere_pareto";
  std::uint64_t seed = 1;
};

NoiseModel noise_from_flags(const std::string& family, std::size_t d, double p, double sigma, double shape) {
  const NoiseFamily f = noise_family_from_string(family);
  if (f == NoiseFamily::Gaussian) {
    if (p != 2.0) throw DomainError("gaussian noise requires p = 2");
    return NoiseModel::gaussian(d, sigma);
  }
  if (f == NoiseFamily::Zero) return NoiseModel::zero(d, p);
  return NoiseModel::sphere_pareto(d, p, sigma, shape);
}

int command_verify_lemma1(const LemmaFlags& f) {
  if (f.d < 1) throw DomainError("--d must be at least 1");
  const NoiseModel noise = noise_from_flags(f.family, f.d, f.p, f.sigma, f.shape);
  const ProblemPtr problem = make_distance_cone(f.G, Vector::Zero(static_cast<Eigen::Index>(f.d)));
  Vector x = Vector::Zero(static_cast<Eigen::Index>(f.d));
  x[0] = 1.0;
  Rng rng = make_stream(f.seed, 0);
  const ClipReport report = verify_clip_bounds(*problem, noise, x, f.M, f.N, rng);
  std::printf("check,p,sigma,M,estimate,bound,cushion,pass\n");
  for (const auto& check : report.checks) {
    std::printf("%s,%s,%s,%s,%s,%s,%s,%s\n", check.name.c_str(), format_double(f.p).c_str(),
                format_double(f.sigma).c_str(), format_double(f.M).c_str(), format_double(check.estimate).c_str(),
                format_double(check.bound).c_str(), format_double(check.cushion).c_str(),
                check.pass ? "pass" : "fail");
  }
  return report.pass() ? kOk : kFailure;
}

int command_calibrate_noise(const LemmaFlags& f, double cap_multiple) {
  if (f.d < 1) throw DomainError("--d must be at least 1");
  if (!(cap_multiple > 0.0)) throw DomainError("--cap must be positive");
  if (f.N < 1) throw DomainError("--N must be at least 1");
  const NoiseModel noise = noise_from_flags(f.family, f.d, f.p, f.sigma, f.shape);
  if (noise.family() == NoiseFamily::Zero) throw DomainError("zero noise has nothing to calibrate");
  const double unit = noise.family() == NoiseFamily::Gaussian ? f.sigma : noise.scale();
  const double cap = cap_multiple * unit;
  const double analytic = truncated_pth_moment(noise, cap);
  Rng rng = make_stream(f.seed, 0);
  Vector xi(static_cast<Eigen::Index>(f.d));
  long double sum = 0.0L;
  for (std::size_t i = 0; i < f.N; ++i) {
    draw(noise, rng, xi);
    sum += std::pow(std::min(xi.norm(), cap), f.p);
  }
  const double empirical = static_cast<double>(sum / static_cast<long double>(f.N));
  std::printf("family=%s p=%s sigma=%s cap=%s analytic=%s empirical=%s rel_error=%s\n", f.family.c_str(),
              format_double(f.p).c_str(), format_double(f.sigma).c_str(), format_double(cap).c_str(),
              format_double(analytic).c_str(), format_double(empirical).c_str(),
              format_double(std::abs(empirical - analytic) / analytic).c_str());
  return kOk;
}

struct AuditFlags {
  std::string kind = "anytime_convex";
  std::size_t T = 1000;
  ScheduleSpec spec;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::string weights = "log_squared";
  int depth = 0;
  double epsilon = 1.0;
};

int command_schedule_audit(AuditFlags f) {
  f.spec.kind = schedule_kind_from_string(f.kind);
  f.spec.alpha = f.alpha;
  f.spec.beta = f.beta;
  if (f.weights == "log_squared") {
    f.spec.weights.kind = WeightFamily::Kind::LogSquared;
  } else if (f.weights == "iterated_log") {
    f.spec.weights.kind = WeightFamily::Kind::IteratedLog;
  } else {
    throw DomainError("--weights must be log_squared or iterated_log");
  }
  f.spec.weights.depth = f.depth;
  f.spec.weights.epsilon = f.epsilon;
  if (f.spec.kind != ScheduleKind::StronglyConvex && f.spec.kind != ScheduleKind::DistanceAdaptive && !f.alpha &&
      !f.beta) {
    f.spec.alpha = 1.0;
  }
  if (f.spec.kind != ScheduleKind::StronglyConvex) f.spec.validate();
  const ScheduleAudit audit = schedule_audit(f.spec, f.T);
  std::printf("kind,T,bound,min_eta_m,max_eta_m,min_eta,max_eta,min_clip,max_clip,product_bounded,clip_floor,status\n");
  std::printf("%s,%zu,%s,%s,%s,%s,%s,%s,%s,%d,%d,%s\n", f.kind.c_str(), f.T, format_double(audit.bound).c_str(),
              format_double(audit.min_eta_m).c_str(), format_double(audit.max_eta_m).c_str(),
              format_double(audit.min_eta).c_str(), format_double(audit.max_eta).c_str(),
              format_double(audit.min_clip).c_str(), format_double(audit.max_clip).c_str(), audit.product_bounded,
              audit.clip_floor, to_string(audit.status).c_str());
  if (!audit.detail.empty()) std::fprintf(stderr, "%s\n", audit.detail.c_str());
  return audit.status == ScheduleAudit::Status::Fail ? kFailure : kOk;
}

void add_noise_flags(CLI::App* app, LemmaFlags& f) {
  app->add_option("--family", f.family, "noise family: sphere_pareto, gaussian or zero")->capture_default_str();
  app->add_option("--p", f.p, "moment order p in (1, 2] (dimensionless)")->capture_default_str();
  app->add_option("--sigma", f.sigma, "p-th moment scale sigma, E||xi||^p = sigma^p (gradient units)")
      ->capture_default_str();
  app->add_option("--shape", f.shape, "Pareto tail index a > p; 0 selects p + 0.25 (dimensionless)")
      ->capture_default_str();
  app->add_option("--d", f.d, "dimension (count)")->capture_default_str();
  app->add_option("--N", f.N, "Monte Carlo sample count (draws)")->capture_default_str();
  app->add_option("--seed", f.seed, "generator seed (integer)")->capture_default_str();
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Clipped stochastic gradient methods under heavy-tailed noise"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  ConfigFlags run_flags;
  std::optional<std::size_t> run_T;
  std::optional<std::uint64_t> run_seed;
  CLI::App* run = app.add_subcommand("run", "single trajectory; writes run_record.json and config_echo.json");
  add_config_flags(run, run_flags);
  run->add_option("--T", run_T, "horizon in iterations (default: largest sweep horizon)");
  run->add_option("--seed", run_seed, "seed of the run (default: first sweep seed)");

  ConfigFlags sweep_flags;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  bool quiet = false;
  CLI::App* sweep = app.add_subcommand("sweep", "all (T, seed) runs; writes results.csv, fits.json, config_echo.json");
  add_config_flags(sweep, sweep_flags);
  sweep->add_option("--jobs", jobs, "worker threads (count); output does not depend on it")->capture_default_str();
  sweep->add_flag("--quiet", quiet, "suppress the per-run progress lines");

  std::string results;
  std::string aggregation = "median";
  std::string metric = "auto";
  CLI::App* fit = app.add_subcommand("fit-rate", "fit the log-log slope of an existing results.csv");
  fit->add_option("--results", results, "path to results.csv")->required();
  fit->add_option("--aggregation", aggregation, "median, mean or quantile:<q>")->capture_default_str();
  fit->add_option("--metric", metric, "final, selected or auto (selected when every row has one)")
      ->capture_default_str();

  LemmaFlags lemma;
  CLI::App* verify = app.add_subcommand("verify-lemma1", "Monte Carlo check of the clipping-error bounds");
  add_noise_flags(verify, lemma);
  verify->add_option("--G", lemma.G, "Lipschitz constant of the test problem (gradient units)")->capture_default_str();
  verify->add_option("--M", lemma.M, "clip level, must be >= 2G (gradient units)")->capture_default_str();

  LemmaFlags calibrate_flags;
  double cap_multiple = 100.0;
  CLI::App* calibrate =
      app.add_subcommand("calibrate-noise", "analytic vs empirical truncated moment E[min(||xi||, cap)^p]");
  add_noise_flags(calibrate, calibrate_flags);
  calibrate->add_option("--cap", cap_multiple,
                        "truncation level as a multiple of the Pareto scale s (gaussian: of sigma)")
      ->capture_default_str();

  AuditFlags audit;
  CLI::App* schedule = app.add_subcommand("schedule-audit", "scan eta_t M_t and M_t over t = 1..T; CSV to stdout");
  schedule->add_option("--kind", audit.kind, "anytime_convex, fixed_convex, strongly_convex or distance_adaptive")
      ->capture_default_str();
  schedule->add_option("--T", audit.T, "horizon in iterations")->capture_default_str();
  schedule->add_option("--G", audit.spec.G, "Lipschitz constant (gradient units)")->capture_default_str();
  schedule->add_option("--p", audit.spec.p, "moment order p in (1, 2]")->capture_default_str();
  schedule->add_option("--M", audit.spec.M, "clip scale M, 0 gives the constant level 2G (gradient units)")
      ->capture_default_str();
  schedule->add_option("--alpha", audit.alpha, "step scale alpha (distance units; default 1 when beta unset)");
  schedule->add_option("--beta", audit.beta, "alternative step scale, alpha = beta / ln(4/delta)");
  schedule->add_option("--delta", audit.spec.delta, "failure probability in (0, 1)")->capture_default_str();
  schedule->add_option("--mu", audit.spec.mu, "strong convexity modulus")->capture_default_str();
  schedule->add_option("--sigma", audit.spec.sigma, "noise scale for distance_adaptive (gradient units)")
      ->capture_default_str();
  schedule->add_option("--r", audit.spec.r, "initial distance estimate r for distance_adaptive (distance units)")
      ->capture_default_str();
  schedule->add_option("--weights", audit.weights, "log_squared or iterated_log")->capture_default_str();
  schedule->add_option("--depth", audit.depth, "iterated_log depth n")->capture_default_str();
  schedule->add_option("--epsilon", audit.epsilon, "iterated_log exponent epsilon > 0")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return command_run(run_flags, run_T, run_seed);
    if (*sweep) return command_sweep(sweep_flags, jobs, quiet);
    if (*fit) return command_fit_rate(results, aggregation, metric);
    if (*verify) return command_verify_lemma1(lemma);
    if (*calibrate) return command_calibrate_noise(calibrate_flags, cap_multiple);
    if (*schedule) return command_schedule_audit(audit);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const PreconditionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return kFailure;
  }
  return kInvalid;
}

}  // namespace clipsgd
