#ifndef SPHCORR_REPORT_HPP_
#define SPHCORR_REPORT_HPP_

// Metric table serialization. The CSV column order and the JSON layout are
// frozen; any change bumps kReportSchemaVersion.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sphcorr/errors.hpp"
#include "sphcorr/metrics.hpp"

namespace sphcorr {

inline constexpr int kReportSchemaVersion = 1;

inline const std::vector<std::string>& report_csv_columns() {
  static const std::vector<std::string> cols = {
      "category", "count",   "iou25",         "iou50",           "iou75",          "deg5cm2",      "deg5cm5",
      "deg10cm2", "deg10cm5", "rot5", "mean_rot_err_deg", "nocs_angle_deg", "nocs_distance"};
  return cols;
}

struct RunMetadata {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string commit = "unknown";
};

// %.17g, which round-trips every double through strtod.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string metric_csv(const MetricTable& t) {
  std::ostringstream os;
  const auto& cols = report_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  auto row = [&os](MetricRow r) {
    os << r.category << ',' << r.count;
    r.for_each_value([&os](const char*, double& v) { os << ',' << format_double(v); });
    os << '\n';
  };
  for (const auto& r : t.categories) row(r);
  row(t.mean);
  return os.str();
}

inline nlohmann::json row_to_json(MetricRow r) {
  nlohmann::json j;
  j["category"] = r.category;
  j["count"] = r.count;
  r.for_each_value([&j](const char* name, double& v) { j[name] = v; });
  return j;
}

inline MetricRow row_from_json(const nlohmann::json& j) {
  MetricRow r;
  r.category = j.at("category").get<std::string>();
  r.count = j.at("count").get<int>();
  r.for_each_value([&j](const char* name, double& v) { v = j.at(name).get<double>(); });
  return r;
}

inline nlohmann::json report_json(const MetricTable& t, const RunMetadata& meta) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["command"] = meta.command;
  j["config_hash"] = meta.config_hash;
  j["seed"] = meta.seed;
  j["commit"] = meta.commit;
  j["categories"] = nlohmann::json::array();
  for (const auto& r : t.categories) j["categories"].push_back(row_to_json(r));
  j["mean"] = row_to_json(t.mean);
  return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << text;
  os.flush();
  if (!os) throw DataError("failed writing " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Writes <dir>/<stem>.json and <dir>/<stem>.csv.
inline void write_report(const MetricTable& t, const RunMetadata& meta, const std::filesystem::path& dir,
                         const std::string& stem = "report") {
  std::filesystem::create_directories(dir);
  write_text_file(dir / (stem + ".json"), report_json(t, meta).dump(2) + "\n");
  write_text_file(dir / (stem + ".csv"), metric_csv(t));
}

struct ParsedReport {
  MetricTable table;
  RunMetadata meta;
  int schema_version = 0;
};

inline ParsedReport parse_report_json(const std::string& text) {
  ParsedReport out;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    out.schema_version = j.at("schema_version").get<int>();
    out.meta.command = j.at("command").get<std::string>();
    out.meta.config_hash = j.at("config_hash").get<std::string>();
    out.meta.seed = j.at("seed").get<std::uint64_t>();
    out.meta.commit = j.at("commit").get<std::string>();
    for (const auto& r : j.at("categories")) out.table.categories.push_back(row_from_json(r));
    out.table.mean = row_from_json(j.at("mean"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  if (out.schema_version > kReportSchemaVersion) throw DataError("report schema is newer than this reader");
  return out;
}

// Inverse of metric_csv; the last row is the mean.
inline MetricTable parse_metric_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  std::string expected;
  for (std::size_t i = 0; i < report_csv_columns().size(); ++i) expected += (i ? "," : "") + report_csv_columns()[i];
  if (line != expected) throw DataError("unexpected report CSV header");
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != report_csv_columns().size()) throw DataError("report CSV row has wrong arity");
    MetricRow r;
    r.category = cells[0];
    r.count = std::stoi(cells[1]);
    std::size_t k = 2;
    r.for_each_value([&](const char*, double& v) { v = std::strtod(cells[k++].c_str(), nullptr); });
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("report CSV has no rows");
  MetricTable t;
  t.mean = rows.back();
  rows.pop_back();
  t.categories = std::move(rows);
  return t;
}

}  // namespace sphcorr

#endif  // SPHCORR_REPORT_HPP_
