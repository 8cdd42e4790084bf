#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "clipsgd/experiments.hpp"

namespace clipsgd {

namespace {

using json = nlohmann::ordered_json;

const std::vector<std::string> kFixedColumns = {
    "horizon",          "seed",           "config_digest",      "final_error",
    "last_iterate_error", "last_iterate_dist_sq", "initial_distance", "distance_max",
    "selected_index",   "selected_error"};

std::string checkpoint_column(std::size_t t) { return "error_t" + std::to_string(t); }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  for (std::string field; std::getline(stream, field, ',');) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  return std::stod(text);
}

// JSON has no NaN or infinity; those serialize as null.
json number(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::vector<std::string> results_columns(const std::vector<std::size_t>& checkpoint_ts) {
  std::vector<std::string> columns = kFixedColumns;
  for (std::size_t t : checkpoint_ts) columns.push_back(checkpoint_column(t));
  return columns;
}

std::string results_row(const RunRecord& record, const std::vector<std::size_t>& checkpoint_ts) {
  std::string row = std::to_string(record.horizon) + "," + std::to_string(record.seed) + "," +
                    record.config_digest + "," + format_double(record.final_error) + "," +
                    format_double(record.last_iterate_error) + "," +
                    format_double(record.last_iterate_dist_sq) + "," +
                    format_double(record.initial_distance) + "," + format_double(record.distance_max) + ",";
  if (record.selected_index) row += std::to_string(*record.selected_index);
  row += ",";
  if (record.selected_error) row += format_double(*record.selected_error);
  std::size_t k = 0;
  for (std::size_t t : checkpoint_ts) {
    row += ",";
    while (k < record.checkpoints.size() && record.checkpoints[k].t < t) ++k;
    if (k < record.checkpoints.size() && record.checkpoints[k].t == t) {
      row += format_double(record.checkpoints[k].error);
    }
  }
  return row;
}

void write_results(const std::vector<RunRecord>& records, const std::filesystem::path& csv_path) {
  std::set<std::size_t> ts;
  for (const auto& record : records) {
    for (const auto& checkpoint : record.checkpoints) ts.insert(checkpoint.t);
  }
  const std::vector<std::size_t> checkpoint_ts(ts.begin(), ts.end());
  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + csv_path.string());
  const auto header = results_columns(checkpoint_ts);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& record : records) out << results_row(record, checkpoint_ts) << '\n';
  if (!out) throw std::runtime_error("write failed for " + csv_path.string());
}

std::vector<RunRecord> read_results(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(csv_path.string() + " is empty");
  const auto header = split(line);
  if (header.size() < kFixedColumns.size() ||
      !std::equal(kFixedColumns.begin(), kFixedColumns.end(), header.begin())) {
    throw std::runtime_error(csv_path.string() + " does not have the results.csv header");
  }
  std::vector<std::size_t> checkpoint_ts;
  for (std::size_t i = kFixedColumns.size(); i < header.size(); ++i) {
    if (header[i].rfind("error_t", 0) != 0) {
      throw std::runtime_error(csv_path.string() + ": unexpected column " + header[i]);
    }
    checkpoint_ts.push_back(std::stoull(header[i].substr(7)));
  }

  std::vector<RunRecord> records;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error(csv_path.string() + ":" + std::to_string(line_number) + ": expected " +
                               std::to_string(header.size()) + " fields");
    }
    try {
      RunRecord record;
      record.horizon = std::stoull(fields[0]);
      record.seed = std::stoull(fields[1]);
      record.config_digest = fields[2];
      record.final_error = parse_double(fields[3]);
      record.last_iterate_error = parse_double(fields[4]);
      record.last_iterate_dist_sq = parse_double(fields[5]);
      record.initial_distance = parse_double(fields[6]);
      record.distance_max = parse_double(fields[7]);
      if (!fields[8].empty()) record.selected_index = std::stoull(fields[8]);
      if (!fields[9].empty()) record.selected_error = parse_double(fields[9]);
      for (std::size_t i = 0; i < checkpoint_ts.size(); ++i) {
        const std::string& field = fields[kFixedColumns.size() + i];
        if (!field.empty()) record.checkpoints.push_back({checkpoint_ts[i], parse_double(field)});
      }
      records.push_back(std::move(record));
    } catch (const std::logic_error&) {
      throw std::runtime_error(csv_path.string() + ":" + std::to_string(line_number) + ": malformed number");
    }
  }
  return records;
}

std::string fits_to_json(const SweepResult& result) {
  json root;
  if (result.fit) {
    const RateFit& fit = *result.fit;
    json f;
    f["slope"] = number(fit.slope);
    f["intercept"] = number(fit.intercept);
    f["r_squared"] = number(fit.r_squared);
    f["n_points"] = fit.n_points;
    f["aggregation"] = to_string(fit.aggregation);
    f["horizons"] = fit.horizons;
    json aggregated = json::array();
    for (double e : fit.aggregated) aggregated.push_back(number(e));
    f["aggregated"] = aggregated;
    f["dropped_horizons"] = fit.dropped_horizons;
    root["fit"] = f;
  } else {
    root["fit"] = nullptr;
  }
  json quantiles = json::array();
  for (const auto& [q, values] : result.quantiles) {
    json entry;
    entry["q"] = q;
    json per_t = json::array();
    for (const auto& [T, e] : values) per_t.push_back(json{{"horizon", T}, {"error", number(e)}});
    entry["values"] = per_t;
    quantiles.push_back(entry);
  }
  root["quantiles"] = quantiles;
  root["runs"] = result.records.size();
  return root.dump(2);
}

std::string run_record_to_json(const RunRecord& record) {
  json root;
  root["horizon"] = record.horizon;
  root["seed"] = record.seed;
  root["config_digest"] = record.config_digest;
  root["final_error"] = number(record.final_error);
  root["last_iterate_error"] = number(record.last_iterate_error);
  root["last_iterate_dist_sq"] = number(record.last_iterate_dist_sq);
  root["initial_distance"] = number(record.initial_distance);
  root["distance_max"] = number(record.distance_max);
  json average = json::array();
  for (Eigen::Index i = 0; i < record.final_average.size(); ++i) average.push_back(number(record.final_average[i]));
  root["final_average"] = average;
  if (record.selected_index) root["selected_index"] = *record.selected_index;
  if (record.selected_error) root["selected_error"] = number(*record.selected_error);
  if (!record.r_history.empty()) root["r_history"] = record.r_history;
  json checkpoints = json::array();
  for (const auto& c : record.checkpoints) checkpoints.push_back(json{{"t", c.t}, {"error", number(c.error)}});
  root["checkpoints"] = checkpoints;
  return root.dump(2);
}

}  // namespace clipsgd
