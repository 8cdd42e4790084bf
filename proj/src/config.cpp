#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "clipsgd/experiments.hpp"

namespace clipsgd {

ConfigError::ConfigError(std::string key, int line, const std::string& message)
    : std::runtime_error([&] {
        std::string text = "config error at '" + key + "'";
        if (line > 0) text += " (line " + std::to_string(line) + ")";
        return text + ": " + message;
      }()),
      key_(std::move(key)),
      line_(line) {}

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::DistanceCone: return "distance_cone";
    case ProblemKind::StronglyConvexBall: return "strongly_convex_ball";
    case ProblemKind::SimplexLinear: return "simplex_linear";
  }
  return "unknown";
}

std::string to_string(const Aggregation& aggregation) {
  switch (aggregation.kind) {
    case Aggregation::Kind::Median: return "median";
    case Aggregation::Kind::Mean: return "mean";
    case Aggregation::Kind::Quantile: return "quantile:" + format_double(aggregation.q);
  }
  return "unknown";
}

Aggregation aggregation_from_string(const std::string& text) {
  if (text == "median") return {Aggregation::Kind::Median, 0.5};
  if (text == "mean") return {Aggregation::Kind::Mean, 0.5};
  constexpr std::string_view prefix = "quantile:";
  if (text.rfind(prefix, 0) == 0) {
    std::size_t used = 0;
    const std::string number = text.substr(prefix.size());
    double q = 0.0;
    try {
      q = std::stod(number, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == number.size() && !number.empty() && q >= 0.0 && q <= 1.0) {
      return {Aggregation::Kind::Quantile, q};
    }
  }
  throw DomainError("aggregation must be median, mean or quantile:<q in [0,1]>, got '" + text + "'");
}

namespace {

using json = nlohmann::ordered_json;

int line_of(const YAML::Node& node) {
  const YAML::Mark mark = node.Mark();
  return mark.is_null() ? 0 : mark.line + 1;
}

class Reader {
 public:
  std::map<std::string, int> lines;

  void check_keys(const YAML::Node& map, const std::string& path,
                  std::initializer_list<std::string_view> allowed) {
    if (!map.IsMap()) throw ConfigError(path, line_of(map), "expected a key/value section");
    for (const auto& entry : map) {
      const std::string key = entry.first.as<std::string>();
      const std::string full = path.empty() ? key : path + "." + key;
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ConfigError(full, line_of(entry.first), "unknown key");
      }
      lines[full] = line_of(entry.first);
    }
  }

  YAML::Node section(const YAML::Node& root, const std::string& key) {
    const YAML::Node node = root[key];
    if (!node) throw ConfigError(key, 0, "missing required section");
    return node;
  }

  template <typename T>
  std::optional<T> optional(const YAML::Node& map, const std::string& path, const std::string& key) {
    const YAML::Node node = map[key];
    if (!node || node.IsNull()) return std::nullopt;
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path + "." + key, line_of(node), "value has the wrong type");
    }
  }

  template <typename T>
  T required(const YAML::Node& map, const std::string& path, const std::string& key) {
    auto value = optional<T>(map, path, key);
    if (!value) throw ConfigError(path + "." + key, line_of(map), "missing required key");
    return *value;
  }

  template <typename T>
  T enumerated(const YAML::Node& map, const std::string& path, const std::string& key,
               T (*convert)(const std::string&)) {
    const std::string text = required<std::string>(map, path, key);
    try {
      return convert(text);
    } catch (const DomainError& e) {
      throw ConfigError(path + "." + key, line_of(map[key]), e.what());
    }
  }
};

ProblemKind problem_kind_from_string(const std::string& name) {
  if (name == "distance_cone") return ProblemKind::DistanceCone;
  if (name == "strongly_convex_ball") return ProblemKind::StronglyConvexBall;
  if (name == "simplex_linear") return ProblemKind::SimplexLinear;
  throw DomainError("unknown problem kind '" + name + "'");
}

WeightFamily::Kind weight_kind_from_string(const std::string& name) {
  if (name == "log_squared") return WeightFamily::Kind::LogSquared;
  if (name == "iterated_log") return WeightFamily::Kind::IteratedLog;
  throw DomainError("unknown weight family '" + name + "'");
}

std::string to_string(WeightFamily::Kind kind) {
  return kind == WeightFamily::Kind::LogSquared ? "log_squared" : "iterated_log";
}

void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, 0, "override must have the form section.key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  std::vector<std::string> parts;
  std::stringstream stream(path);
  for (std::string part; std::getline(stream, part, '.');) parts.push_back(part);

  // Walk with fresh handles: assigning to a YAML::Node handle rebinds it.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node child = chain.back()[parts[i]];
    if (!child || !child.IsMap()) {
      chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
      child = chain.back()[parts[i]];
    }
    chain.push_back(child);
  }
  try {
    chain.back()[parts.back()] = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path, 0, std::string("override value does not parse: ") + e.what());
  }
}

ExperimentConfig read_tree(const YAML::Node& root, Reader& in) {
  if (!root || !root.IsMap()) throw ConfigError("<root>", 0, "expected a key/value tree");
  in.check_keys(root, "", {"problem", "noise", "schedule", "sweep"});
  ExperimentConfig config;

  const YAML::Node problem = in.section(root, "problem");
  in.check_keys(problem, "problem",
                {"kind", "dimension", "G", "mu", "radius", "x_star", "x_star_seed", "x_star_norm",
                 "start", "start_distance", "start_seed", "cost", "cost_seed"});
  ProblemConfig& pc = config.problem;
  pc.kind = in.enumerated<ProblemKind>(problem, "problem", "kind", problem_kind_from_string);
  pc.cost = in.optional<std::vector<double>>(problem, "problem", "cost").value_or(std::vector<double>{});
  if (pc.kind == ProblemKind::SimplexLinear && !pc.cost.empty() && !problem["dimension"]) {
    pc.dimension = pc.cost.size();
  } else {
    pc.dimension = in.required<std::size_t>(problem, "problem", "dimension");
  }
  pc.G = in.optional<double>(problem, "problem", "G").value_or(1.0);
  pc.mu = in.optional<double>(problem, "problem", "mu").value_or(0.0);
  pc.radius = in.optional<double>(problem, "problem", "radius");
  pc.x_star = in.optional<std::vector<double>>(problem, "problem", "x_star").value_or(std::vector<double>{});
  pc.x_star_seed = in.optional<std::uint64_t>(problem, "problem", "x_star_seed");
  pc.x_star_norm = in.optional<double>(problem, "problem", "x_star_norm").value_or(0.0);
  pc.start = in.optional<std::vector<double>>(problem, "problem", "start").value_or(std::vector<double>{});
  pc.start_distance = in.optional<double>(problem, "problem", "start_distance");
  pc.start_seed = in.optional<std::uint64_t>(problem, "problem", "start_seed").value_or(1);
  pc.cost_seed = in.optional<std::uint64_t>(problem, "problem", "cost_seed");

  const YAML::Node noise = in.section(root, "noise");
  in.check_keys(noise, "noise", {"family", "p", "sigma", "shape"});
  NoiseConfig& nc = config.noise;
  nc.family = in.enumerated<NoiseFamily>(noise, "noise", "family", noise_family_from_string);
  nc.p = in.required<double>(noise, "noise", "p");
  nc.sigma = nc.family == NoiseFamily::Zero
                 ? in.optional<double>(noise, "noise", "sigma").value_or(0.0)
                 : in.required<double>(noise, "noise", "sigma");
  nc.shape = in.optional<double>(noise, "noise", "shape");

  const YAML::Node schedule = in.section(root, "schedule");
  in.check_keys(schedule, "schedule",
                {"kind", "G", "p", "M", "alpha", "beta", "delta", "mu", "sigma", "r", "weights"});
  ScheduleConfig& sc = config.schedule;
  sc.kind = in.enumerated<ScheduleKind>(schedule, "schedule", "kind", schedule_kind_from_string);
  sc.G = in.optional<double>(schedule, "schedule", "G");
  sc.p = in.optional<double>(schedule, "schedule", "p");
  sc.M = in.optional<double>(schedule, "schedule", "M").value_or(0.0);
  sc.alpha = in.optional<double>(schedule, "schedule", "alpha");
  sc.beta = in.optional<double>(schedule, "schedule", "beta");
  sc.delta = in.optional<double>(schedule, "schedule", "delta").value_or(0.05);
  sc.mu = in.optional<double>(schedule, "schedule", "mu");
  sc.sigma = in.optional<double>(schedule, "schedule", "sigma");
  sc.r = in.optional<double>(schedule, "schedule", "r").value_or(1.0);
  if (const YAML::Node weights = schedule["weights"]) {
    in.check_keys(weights, "schedule.weights", {"family", "depth", "epsilon"});
    sc.weights.kind = in.enumerated<WeightFamily::Kind>(weights, "schedule.weights", "family",
                                                        weight_kind_from_string);
    sc.weights.depth = in.optional<int>(weights, "schedule.weights", "depth").value_or(0);
    sc.weights.epsilon = in.optional<double>(weights, "schedule.weights", "epsilon").value_or(1.0);
  }

  const YAML::Node sweep = in.section(root, "sweep");
  in.check_keys(sweep, "sweep",
                {"horizons", "seeds", "master_seed", "averaging", "aggregation", "quantiles", "output"});
  SweepConfig& wc = config.sweep;
  wc.horizons = in.required<std::vector<std::size_t>>(sweep, "sweep", "horizons");
  const YAML::Node seeds = sweep["seeds"];
  if (!seeds) throw ConfigError("sweep.seeds", line_of(sweep), "missing required key");
  if (seeds.IsMap()) {
    in.check_keys(seeds, "sweep.seeds", {"first", "count"});
    const auto first = in.required<std::uint64_t>(seeds, "sweep.seeds", "first");
    const auto count = in.required<std::uint64_t>(seeds, "sweep.seeds", "count");
    for (std::uint64_t i = 0; i < count; ++i) wc.seeds.push_back(first + i);
  } else {
    wc.seeds = in.required<std::vector<std::uint64_t>>(sweep, "sweep", "seeds");
  }
  wc.master_seed = in.optional<std::uint64_t>(sweep, "sweep", "master_seed").value_or(0);
  if (sweep["averaging"]) {
    wc.averaging = in.enumerated<Averaging>(sweep, "sweep", "averaging", averaging_from_string);
  }
  if (sweep["aggregation"]) {
    wc.aggregation = in.enumerated<Aggregation>(
        sweep, "sweep", "aggregation", [](const std::string& s) { return aggregation_from_string(s); });
  }
  wc.quantiles = in.optional<std::vector<double>>(sweep, "sweep", "quantiles").value_or(std::vector<double>{});
  wc.output = in.optional<std::string>(sweep, "sweep", "output").value_or("results");
  return config;
}

ExperimentConfig parse_root(YAML::Node root, const std::vector<std::string>& overrides) {
  for (const auto& assignment : overrides) apply_override(root, assignment);
  Reader in;
  ExperimentConfig config = read_tree(root, in);
  try {
    config.validate();
  } catch (const ConfigError& e) {
    if (e.line() == 0 && in.lines.count(e.key())) {
      throw ConfigError(e.key(), in.lines.at(e.key()), std::string(e.what()).substr(
                                                           std::string(e.what()).find(": ") + 2));
    }
    throw;
  }
  return config;
}

json double_list(const std::vector<double>& values) {
  json out = json::array();
  for (double v : values) out.push_back(v);
  return out;
}

Vector to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Vector random_direction(std::size_t d, std::uint64_t seed, std::uint64_t stream) {
  Rng rng = make_stream(seed, stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u(static_cast<Eigen::Index>(d));
  double n = 0.0;
  do {
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
    n = u.norm();
  } while (n == 0.0);
  return u / n;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& message) {
    throw ConfigError(key, 0, message);
  };
  const ProblemConfig& pc = problem;
  if (pc.dimension < 1) fail("problem.dimension", "must be at least 1");
  if (!pc.x_star.empty() && pc.x_star.size() != pc.dimension) {
    fail("problem.x_star", "length must equal problem.dimension");
  }
  if (!pc.x_star.empty() && pc.x_star_seed) fail("problem.x_star_seed", "conflicts with problem.x_star");
  if (pc.x_star_seed && !(pc.x_star_norm >= 0.0)) fail("problem.x_star_norm", "must be nonnegative");
  if (!pc.start.empty() && pc.start.size() != pc.dimension) {
    fail("problem.start", "length must equal problem.dimension");
  }
  if (!pc.start.empty() && pc.start_distance) fail("problem.start_distance", "conflicts with problem.start");
  if (pc.start_distance && !(*pc.start_distance >= 0.0)) fail("problem.start_distance", "must be nonnegative");
  switch (pc.kind) {
    case ProblemKind::DistanceCone:
      if (!(pc.G > 0.0)) fail("problem.G", "must be positive");
      if (pc.radius && !(*pc.radius > 0.0)) fail("problem.radius", "must be positive");
      break;
    case ProblemKind::StronglyConvexBall:
      if (!(pc.mu > 0.0)) fail("problem.mu", "must be positive");
      if (!pc.radius) fail("problem.radius", "missing required key");
      if (!(*pc.radius > 0.0)) fail("problem.radius", "must be positive");
      break;
    case ProblemKind::SimplexLinear:
      if (pc.dimension < 2) fail("problem.dimension", "simplex problems need dimension >= 2");
      if (pc.cost.empty() && !pc.cost_seed) fail("problem.cost", "missing required key (or problem.cost_seed)");
      if (!pc.cost.empty() && pc.cost.size() != pc.dimension) fail("problem.cost", "length must equal problem.dimension");
      if (pc.start_distance) fail("problem.start_distance", "not supported for simplex problems");
      break;
  }

  if (!(noise.p > 1.0 && noise.p <= 2.0)) fail("noise.p", "must lie in (1, 2]");
  if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) fail("noise.sigma", "must be finite and nonnegative");
  if (noise.family == NoiseFamily::Gaussian && noise.p != 2.0) fail("noise.p", "gaussian noise requires p = 2");
  if (noise.shape && !(*noise.shape > noise.p)) fail("noise.shape", "must exceed noise.p");

  const ScheduleConfig& sc = schedule;
  if (!(sc.M >= 0.0)) fail("schedule.M", "must be nonnegative");
  if (sc.G && !(*sc.G > 0.0)) fail("schedule.G", "must be positive");
  if (sc.p && !(*sc.p > 1.0 && *sc.p <= 2.0)) fail("schedule.p", "must lie in (1, 2]");
  switch (sc.kind) {
    case ScheduleKind::AnytimeConvex:
    case ScheduleKind::FixedConvex:
      if (!sc.alpha && !sc.beta) fail("schedule.alpha", "missing required key (or schedule.beta)");
      if (sc.alpha && sc.beta) fail("schedule.beta", "conflicts with schedule.alpha");
      if (sc.alpha && !(*sc.alpha > 0.0)) fail("schedule.alpha", "must be positive");
      if (sc.beta && !(*sc.beta > 0.0)) fail("schedule.beta", "must be positive");
      if (sc.beta && !(sc.delta > 0.0 && sc.delta < 1.0)) fail("schedule.delta", "must lie in (0, 1)");
      break;
    case ScheduleKind::StronglyConvex: {
      const double mu = sc.mu.value_or(problem.mu);
      if (!(mu > 0.0)) fail("schedule.mu", "must be positive (set it or use a strongly convex problem)");
      break;
    }
    case ScheduleKind::DistanceAdaptive:
      if (!(sc.r > 0.0)) fail("schedule.r", "must be positive");
      if (!(sc.delta > 0.0 && sc.delta < 1.0)) fail("schedule.delta", "must lie in (0, 1)");
      if (sc.sigma && !(*sc.sigma >= 0.0)) fail("schedule.sigma", "must be nonnegative");
      if (sc.weights.kind == WeightFamily::Kind::IteratedLog) {
        if (!(sc.weights.epsilon > 0.0)) fail("schedule.weights.epsilon", "must be positive");
        if (sc.weights.depth < 0) fail("schedule.weights.depth", "must be nonnegative");
      }
      break;
  }

  if (sweep.horizons.empty()) fail("sweep.horizons", "must not be empty");
  for (std::size_t i = 0; i < sweep.horizons.size(); ++i) {
    if (sweep.horizons[i] < 1) fail("sweep.horizons", "every horizon must be at least 1");
    if (i > 0 && sweep.horizons[i] <= sweep.horizons[i - 1]) fail("sweep.horizons", "must be strictly increasing");
  }
  if (sweep.seeds.empty()) fail("sweep.seeds", "must contain at least one seed");
  if (std::set<std::uint64_t>(sweep.seeds.begin(), sweep.seeds.end()).size() != sweep.seeds.size()) {
    fail("sweep.seeds", "seeds must be distinct");
  }
  for (double q : sweep.quantiles) {
    if (!(q >= 0.0 && q <= 1.0)) fail("sweep.quantiles", "levels must lie in [0, 1]");
  }
  if (sweep.averaging == Averaging::RWeighted && sc.kind != ScheduleKind::DistanceAdaptive) {
    fail("sweep.averaging", "r_weighted averaging requires the distance_adaptive schedule");
  }
  if (sweep.output.empty()) fail("sweep.output", "must not be empty");
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("<document>", e.mark.line + 1, e.msg);
  }
  return parse_root(root, overrides);
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream file(path);
  if (!file) throw ConfigError("<file>", 0, "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_config(buffer.str(), overrides);
}

std::string config_to_json(const ExperimentConfig& config) {
  json root;
  const ProblemConfig& pc = config.problem;
  json problem;
  problem["kind"] = to_string(pc.kind);
  problem["dimension"] = pc.dimension;
  problem["G"] = pc.G;
  problem["mu"] = pc.mu;
  if (pc.radius) problem["radius"] = *pc.radius;
  if (!pc.x_star.empty()) problem["x_star"] = double_list(pc.x_star);
  if (pc.x_star_seed) problem["x_star_seed"] = *pc.x_star_seed;
  problem["x_star_norm"] = pc.x_star_norm;
  if (!pc.start.empty()) problem["start"] = double_list(pc.start);
  if (pc.start_distance) problem["start_distance"] = *pc.start_distance;
  problem["start_seed"] = pc.start_seed;
  if (!pc.cost.empty()) problem["cost"] = double_list(pc.cost);
  if (pc.cost_seed) problem["cost_seed"] = *pc.cost_seed;
  root["problem"] = problem;

  json noise;
  noise["family"] = to_string(config.noise.family);
  noise["p"] = config.noise.p;
  noise["sigma"] = config.noise.sigma;
  if (config.noise.shape) noise["shape"] = *config.noise.shape;
  root["noise"] = noise;

  const ScheduleConfig& sc = config.schedule;
  json schedule;
  schedule["kind"] = to_string(sc.kind);
  if (sc.G) schedule["G"] = *sc.G;
  if (sc.p) schedule["p"] = *sc.p;
  schedule["M"] = sc.M;
  if (sc.alpha) schedule["alpha"] = *sc.alpha;
  if (sc.beta) schedule["beta"] = *sc.beta;
  schedule["delta"] = sc.delta;
  if (sc.mu) schedule["mu"] = *sc.mu;
  if (sc.sigma) schedule["sigma"] = *sc.sigma;
  schedule["r"] = sc.r;
  schedule["weights"] = json{{"family", to_string(sc.weights.kind)},
                             {"depth", sc.weights.depth},
                             {"epsilon", sc.weights.epsilon}};
  root["schedule"] = schedule;

  const SweepConfig& wc = config.sweep;
  json sweep;
  sweep["horizons"] = wc.horizons;
  sweep["seeds"] = wc.seeds;
  sweep["master_seed"] = wc.master_seed;
  if (wc.averaging) sweep["averaging"] = to_string(*wc.averaging);
  sweep["aggregation"] = to_string(wc.aggregation);
  sweep["quantiles"] = double_list(wc.quantiles);
  sweep["output"] = wc.output;
  root["sweep"] = sweep;
  return root.dump(2);
}

void write_config_echo(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_to_json(config) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string config_digest(const ExperimentConfig& config) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : config_to_json(config)) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

Experiment build_experiment(const ExperimentConfig& config) {
  config.validate();
  const ProblemConfig& pc = config.problem;
  const std::size_t d = pc.dimension;

  Vector x_star = Vector::Zero(static_cast<Eigen::Index>(d));
  if (!pc.x_star.empty()) x_star = to_vector(pc.x_star);
  if (pc.x_star_seed) x_star = pc.x_star_norm * random_direction(d, *pc.x_star_seed, 0);

  ProblemPtr problem;
  try {
    switch (pc.kind) {
      case ProblemKind::DistanceCone: problem = make_distance_cone(pc.G, x_star, pc.radius); break;
      case ProblemKind::StronglyConvexBall:
        problem = make_strongly_convex_ball(pc.mu, x_star, *pc.radius);
        break;
      case ProblemKind::SimplexLinear: {
        Vector cost(static_cast<Eigen::Index>(d));
        if (!pc.cost.empty()) {
          cost = to_vector(pc.cost);
        } else {
          Rng rng = make_stream(*pc.cost_seed, 2);
          std::uniform_real_distribution<double> uniform(0.0, 1.0);
          for (Eigen::Index i = 0; i < cost.size(); ++i) cost[i] = uniform(rng);
        }
        problem = make_simplex_linear(cost);
        break;
      }
    }
  } catch (const DomainError& e) {
    throw ConfigError("problem", 0, e.what());
  }

  Vector x1;
  if (!pc.start.empty()) {
    x1 = to_vector(pc.start);
  } else if (pc.start_distance) {
    x1 = problem->x_star() + *pc.start_distance * random_direction(d, pc.start_seed, 1);
  } else if (pc.kind == ProblemKind::SimplexLinear) {
    x1 = Vector::Constant(static_cast<Eigen::Index>(d), 1.0 / static_cast<double>(d));
  } else {
    x1 = Vector::Zero(static_cast<Eigen::Index>(d));
  }
  if (!problem->is_feasible(x1)) throw ConfigError("problem.start", 0, "x_1 is not feasible");

  NoiseModel noise(NoiseModel::Params{config.noise.family, config.noise.p, config.noise.sigma,
                                      config.noise.shape.value_or(0.0), d, problem->norm_tag()});

  const ScheduleConfig& sc = config.schedule;
  ScheduleSpec spec;
  spec.kind = sc.kind;
  spec.G = sc.G.value_or(problem->lipschitz());
  spec.p = sc.p.value_or(config.noise.p);
  spec.M = sc.M;
  spec.alpha = sc.alpha;
  spec.beta = sc.beta;
  spec.delta = sc.delta;
  spec.mu = sc.mu.value_or(problem->mu());
  spec.sigma = sc.sigma.value_or(noise.sigma());
  spec.r = sc.r;
  spec.weights = sc.weights;

  Averaging averaging = Averaging::Uniform;
  if (sc.kind == ScheduleKind::StronglyConvex) averaging = Averaging::TWeighted;
  if (sc.kind == ScheduleKind::DistanceAdaptive) averaging = Averaging::RWeighted;
  if (config.sweep.averaging) averaging = *config.sweep.averaging;

  return Experiment{problem, noise, spec, averaging, x1, config_digest(config)};
}

RunRecord run_single(const Experiment& experiment, std::size_t horizon, std::uint64_t master_seed,
                     std::uint64_t seed, const std::vector<std::size_t>& extra_checkpoints) {
  ScheduleSpec spec = experiment.schedule;
  if (spec.kind == ScheduleKind::FixedConvex) spec.horizon = horizon;
  Schedule schedule(spec);
  Rng rng = make_stream(master_seed, seed);
  RunOptions options;
  options.averaging = experiment.averaging;
  options.extra_checkpoints = extra_checkpoints;
  RunRecord record =
      experiment.mirror()
          ? run_md(*experiment.problem, experiment.noise, schedule, horizon, experiment.x1, rng, options)
          : run_sgd(*experiment.problem, experiment.noise, schedule, horizon, experiment.x1, rng, options);
  record.seed = seed;
  record.config_digest = experiment.digest;
  return record;
}

}  // namespace clipsgd
