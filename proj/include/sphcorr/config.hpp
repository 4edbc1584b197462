#ifndef SPHCORR_CONFIG_HPP_
#define SPHCORR_CONFIG_HPP_

// Experiment configuration: a TOML subset (sections, `key = value`, strings,
// numbers, booleans, one-line string arrays, `#` comments) with a frozen
// schema. Unknown sections or keys are rejected.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sphcorr/errors.hpp"
#include "sphcorr/losses.hpp"
#include "sphcorr/scene.hpp"
#include "sphcorr/sphere_grid.hpp"

namespace sphcorr {

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
  std::uint64_t seed = 1;

  struct Grid {
    GridKind kind = GridKind::kHealpix;
    int resolution = 4;
  } grid;

  struct Model {
    int layers = 2;
    int width = 32;
    int hidden = 64;
    double epos_sigma = 0.02;
  } model;

  struct Features {
    int k = 8;
    double distance_gain = 10.0;
    std::uint64_t projection_seed = 0x5eed;
    bool inject_xyz = false;
  } features;

  struct Training {
    int steps = 5000;
    int batch = 16;
    double lr = 1e-3;
    std::string schedule = "cosine";  // cosine | constant
    LossKind loss = LossKind::kHypL2;
    double clip_norm = 0.0;  // 0 disables clipping
    bool mask_weighted = false;
    bool augment = true;
    bool so3_augment = false;          // Haar rotations instead of the small perturbation
    std::string normalization = "gt";  // gt | estimated
    int eval_every = 0;                // 0 disables periodic held-out evaluation
    int eval_instances = 30;
  } training;

  struct Data {
    std::vector<std::string> categories = {"bottle", "mug", "box"};
    int train_instances = 150;
    int test_instances = 50;
    std::uint64_t split_seed = 7;
    double noise_sigma = 0.0;  // meters
    int points = 2048;
    int shape_points = 8192;
    double size_inflation = 1.25;
    double translation_aug = 0.02;
    double scale_aug_lo = 0.8;
    double scale_aug_hi = 1.2;
    double rotation_aug_deg = 20.0;
  } data;

  struct Ransac {
    int iterations = 256;
    int sample_size = 3;
    double threshold_deg = 5.0;
  } ransac;

  struct Eval {
    std::int64_t iou_samples = 100000;
    bool symmetric_axis = false;
  } eval;

  struct GridBench {
    int healpix_nside = 8;
    int equirect_n = 28;
    int fibonacci_n = 768;
    std::int64_t samples = 10000000;
    int observations = 12;
  } grid_bench;

  struct Output {
    std::string dir = "runs/desk";
  } output;
};

namespace config_detail {

struct Value {
  enum class Type { kString, kNumber, kBool, kArray } type = Type::kString;
  std::string text;               // string contents or number literal
  bool flag = false;
  std::vector<std::string> items;  // string array
};

using Table = std::map<std::string, std::map<std::string, Value>>;

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline std::string parse_quoted(const std::string& s, int line_no) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"' || s.find('"', 1) != s.size() - 1) {
    throw ConfigError("line " + std::to_string(line_no) + ": malformed string " + s);
  }
  return s.substr(1, s.size() - 2);
}

inline Value parse_value(const std::string& raw, int line_no) {
  Value v;
  if (raw.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing value");
  if (raw.front() == '"') {
    v.type = Value::Type::kString;
    v.text = parse_quoted(raw, line_no);
  } else if (raw == "true" || raw == "false") {
    v.type = Value::Type::kBool;
    v.flag = raw == "true";
  } else if (raw.front() == '[') {
    if (raw.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
    v.type = Value::Type::kArray;
    const std::string body = trim(raw.substr(1, raw.size() - 2));
    if (!body.empty()) {
      std::stringstream ss(body);
      std::string item;
      while (std::getline(ss, item, ',')) v.items.push_back(parse_quoted(trim(item), line_no));
    }
  } else {
    v.type = Value::Type::kNumber;
    v.text = raw;
    char* end = nullptr;
    std::strtod(raw.c_str(), &end);
    if (end != raw.c_str() + raw.size()) throw ConfigError("line " + std::to_string(line_no) + ": bad number " + raw);
  }
  return v;
}

inline Table parse_table(const std::string& text) {
  Table t;
  std::string section;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      t[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    auto& sec = t[section];
    if (sec.count(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + key);
    sec[key] = parse_value(trim(line.substr(eq + 1)), line_no);
  }
  return t;
}

// Reads the table into typed fields, consuming every entry it recognizes.
class Reader {
 public:
  explicit Reader(Table t) : t_(std::move(t)) {}

  void integer(const std::string& sec, const std::string& key, int& out) {
    std::int64_t v = out;
    integer(sec, key, v);
    if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(name(sec, key) + " out of range");
    out = static_cast<int>(v);
  }
  void integer(const std::string& sec, const std::string& key, std::int64_t& out) {
    if (const Value* v = take(sec, key, Value::Type::kNumber)) {
      const double d = std::strtod(v->text.c_str(), nullptr);
      if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError(name(sec, key) + " must be an integer");
      out = static_cast<std::int64_t>(d);
    }
  }
  void unsigned_integer(const std::string& sec, const std::string& key, std::uint64_t& out) {
    if (const Value* v = take(sec, key, Value::Type::kNumber)) {
      if (v->text.empty() || v->text.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(name(sec, key) + " must be a non-negative integer");
      }
      out = std::stoull(v->text);
    }
  }
  void real(const std::string& sec, const std::string& key, double& out) {
    if (const Value* v = take(sec, key, Value::Type::kNumber)) out = std::strtod(v->text.c_str(), nullptr);
  }
  void boolean(const std::string& sec, const std::string& key, bool& out) {
    if (const Value* v = take(sec, key, Value::Type::kBool)) out = v->flag;
  }
  void string(const std::string& sec, const std::string& key, std::string& out) {
    if (const Value* v = take(sec, key, Value::Type::kString)) out = v->text;
  }
  void strings(const std::string& sec, const std::string& key, std::vector<std::string>& out) {
    if (const Value* v = take(sec, key, Value::Type::kArray)) out = v->items;
  }

  void reject_leftovers() const {
    for (const auto& [sec, keys] : t_) {
      for (const auto& kv : keys) {
        if (!used_.count(name(sec, kv.first))) throw ConfigError("unknown config key " + name(sec, kv.first));
      }
    }
  }

 private:
  static std::string name(const std::string& sec, const std::string& key) {
    return sec.empty() ? key : sec + "." + key;
  }
  const Value* take(const std::string& sec, const std::string& key, Value::Type type) {
    const auto s = t_.find(sec);
    if (s == t_.end()) return nullptr;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    if (k->second.type != type) throw ConfigError(name(sec, key) + " has the wrong type");
    used_.insert({name(sec, key), true});
    return &k->second;
  }

  Table t_;
  std::map<std::string, bool> used_;
};

inline std::string format_real(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string quote(const std::string& s) { return "\"" + s + "\""; }

}  // namespace config_detail

inline void validate(const ExperimentConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(c.model.layers >= 0 && c.model.width >= 5 && c.model.hidden >= 1, "model needs layers >= 0, width >= 5, hidden >= 1");
  need(c.model.epos_sigma >= 0.0, "model.epos_sigma must be >= 0");
  need(c.grid.resolution >= 1, "grid.resolution must be >= 1");
  need(c.grid.kind != GridKind::kHealpix || (c.grid.resolution & (c.grid.resolution - 1)) == 0,
       "grid.resolution must be a power of two for healpix");
  need(c.features.k >= 1 && c.features.k < c.data.points, "features.k must lie in [1, data.points)");
  need(c.training.steps >= 0 && c.training.batch >= 1, "training needs steps >= 0 and batch >= 1");
  need(c.training.lr >= 0.0, "training.lr must be >= 0");
  need(c.training.schedule == "cosine" || c.training.schedule == "constant", "training.schedule must be cosine or constant");
  need(c.training.normalization == "gt" || c.training.normalization == "estimated",
       "training.normalization must be gt or estimated");
  need(c.training.clip_norm >= 0.0, "training.clip_norm must be >= 0");
  need(c.training.eval_every >= 0 && c.training.eval_instances >= 1, "training eval settings out of range");
  need(!c.data.categories.empty(), "data.categories is empty");
  for (const auto& cat : c.data.categories) {
    try {
      parse_category(cat);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  need(c.data.train_instances >= 0 && c.data.test_instances >= 0, "instance counts must be >= 0");
  need(c.data.points >= 32 && c.data.shape_points >= 64, "data.points >= 32 and data.shape_points >= 64 required");
  need(c.data.noise_sigma >= 0.0 && c.data.size_inflation > 0.0, "noise must be >= 0 and size_inflation > 0");
  need(c.data.translation_aug >= 0.0 && c.data.scale_aug_lo > 0.0 && c.data.scale_aug_lo <= c.data.scale_aug_hi &&
           c.data.rotation_aug_deg >= 0.0,
       "augmentation ranges out of range");
  need(c.ransac.iterations >= 1 && c.ransac.sample_size >= 2, "ransac needs iterations >= 1 and sample_size >= 2");
  need(c.ransac.threshold_deg > 0.0 && c.ransac.threshold_deg < 180.0, "ransac.threshold_deg must lie in (0, 180)");
  need(c.eval.iou_samples >= 1, "eval.iou_samples must be >= 1");
  need(c.grid_bench.samples >= 100000, "grid_bench.samples must be >= 1e5");
  need(c.grid_bench.healpix_nside >= 1 && (c.grid_bench.healpix_nside & (c.grid_bench.healpix_nside - 1)) == 0,
       "grid_bench.healpix_nside must be a power of two");
  need(c.grid_bench.equirect_n >= 1 && c.grid_bench.fibonacci_n >= 1 && c.grid_bench.observations >= 0,
       "grid_bench sizes out of range");
}

inline ExperimentConfig parse_config(const std::string& text) {
  using config_detail::Reader;
  Reader r(config_detail::parse_table(text));
  ExperimentConfig c;
  int version = -1;
  r.integer("", "schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw ConfigError("config schema_version must be " + std::to_string(kConfigSchemaVersion));
  }
  r.unsigned_integer("", "seed", c.seed);

  std::string kind = std::string(to_string(c.grid.kind));
  r.string("grid", "kind", kind);
  try {
    c.grid.kind = parse_grid_kind(kind);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  r.integer("grid", "resolution", c.grid.resolution);

  r.integer("model", "layers", c.model.layers);
  r.integer("model", "width", c.model.width);
  r.integer("model", "hidden", c.model.hidden);
  r.real("model", "epos_sigma", c.model.epos_sigma);

  r.integer("features", "k", c.features.k);
  r.real("features", "distance_gain", c.features.distance_gain);
  r.unsigned_integer("features", "projection_seed", c.features.projection_seed);
  r.boolean("features", "inject_xyz", c.features.inject_xyz);

  r.integer("training", "steps", c.training.steps);
  r.integer("training", "batch", c.training.batch);
  r.real("training", "lr", c.training.lr);
  r.string("training", "schedule", c.training.schedule);
  std::string loss = std::string(to_string(c.training.loss));
  r.string("training", "loss", loss);
  try {
    c.training.loss = parse_loss_kind(loss);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  r.real("training", "clip_norm", c.training.clip_norm);
  r.boolean("training", "mask_weighted", c.training.mask_weighted);
  r.boolean("training", "augment", c.training.augment);
  r.boolean("training", "so3_augment", c.training.so3_augment);
  r.string("training", "normalization", c.training.normalization);
  r.integer("training", "eval_every", c.training.eval_every);
  r.integer("training", "eval_instances", c.training.eval_instances);

  r.strings("data", "categories", c.data.categories);
  r.integer("data", "train_instances", c.data.train_instances);
  r.integer("data", "test_instances", c.data.test_instances);
  r.unsigned_integer("data", "split_seed", c.data.split_seed);
  r.real("data", "noise_sigma", c.data.noise_sigma);
  r.integer("data", "points", c.data.points);
  r.integer("data", "shape_points", c.data.shape_points);
  r.real("data", "size_inflation", c.data.size_inflation);
  r.real("data", "translation_aug", c.data.translation_aug);
  r.real("data", "scale_aug_lo", c.data.scale_aug_lo);
  r.real("data", "scale_aug_hi", c.data.scale_aug_hi);
  r.real("data", "rotation_aug_deg", c.data.rotation_aug_deg);

  r.integer("ransac", "iterations", c.ransac.iterations);
  r.integer("ransac", "sample_size", c.ransac.sample_size);
  r.real("ransac", "threshold_deg", c.ransac.threshold_deg);

  r.integer("eval", "iou_samples", c.eval.iou_samples);
  r.boolean("eval", "symmetric_axis", c.eval.symmetric_axis);

  r.integer("grid_bench", "healpix_nside", c.grid_bench.healpix_nside);
  r.integer("grid_bench", "equirect_n", c.grid_bench.equirect_n);
  r.integer("grid_bench", "fibonacci_n", c.grid_bench.fibonacci_n);
  r.integer("grid_bench", "samples", c.grid_bench.samples);
  r.integer("grid_bench", "observations", c.grid_bench.observations);

  r.string("output", "dir", c.output.dir);

  r.reject_leftovers();
  validate(c);
  return c;
}

// Canonical text: sections and keys sorted, numbers in shortest round-trip
// form. Parsing this text yields the same config.
inline std::string serialize_config(const ExperimentConfig& c) {
  using config_detail::format_real;
  using config_detail::quote;
  std::map<std::string, std::map<std::string, std::string>> t;
  t[""]["schema_version"] = std::to_string(kConfigSchemaVersion);
  t[""]["seed"] = std::to_string(c.seed);
  t["grid"]["kind"] = quote(std::string(to_string(c.grid.kind)));
  t["grid"]["resolution"] = std::to_string(c.grid.resolution);
  t["model"]["layers"] = std::to_string(c.model.layers);
  t["model"]["width"] = std::to_string(c.model.width);
  t["model"]["hidden"] = std::to_string(c.model.hidden);
  t["model"]["epos_sigma"] = format_real(c.model.epos_sigma);
  t["features"]["k"] = std::to_string(c.features.k);
  t["features"]["distance_gain"] = format_real(c.features.distance_gain);
  t["features"]["projection_seed"] = std::to_string(c.features.projection_seed);
  t["features"]["inject_xyz"] = c.features.inject_xyz ? "true" : "false";
  t["training"]["steps"] = std::to_string(c.training.steps);
  t["training"]["batch"] = std::to_string(c.training.batch);
  t["training"]["lr"] = format_real(c.training.lr);
  t["training"]["schedule"] = quote(c.training.schedule);
  t["training"]["loss"] = quote(std::string(to_string(c.training.loss)));
  t["training"]["clip_norm"] = format_real(c.training.clip_norm);
  t["training"]["mask_weighted"] = c.training.mask_weighted ? "true" : "false";
  t["training"]["augment"] = c.training.augment ? "true" : "false";
  t["training"]["so3_augment"] = c.training.so3_augment ? "true" : "false";
  t["training"]["normalization"] = quote(c.training.normalization);
  t["training"]["eval_every"] = std::to_string(c.training.eval_every);
  t["training"]["eval_instances"] = std::to_string(c.training.eval_instances);
  std::string cats = "[";
  for (std::size_t i = 0; i < c.data.categories.size(); ++i) cats += (i ? ", " : "") + quote(c.data.categories[i]);
  t["data"]["categories"] = cats + "]";
  t["data"]["train_instances"] = std::to_string(c.data.train_instances);
  t["data"]["test_instances"] = std::to_string(c.data.test_instances);
  t["data"]["split_seed"] = std::to_string(c.data.split_seed);
  t["data"]["noise_sigma"] = format_real(c.data.noise_sigma);
  t["data"]["points"] = std::to_string(c.data.points);
  t["data"]["shape_points"] = std::to_string(c.data.shape_points);
  t["data"]["size_inflation"] = format_real(c.data.size_inflation);
  t["data"]["translation_aug"] = format_real(c.data.translation_aug);
  t["data"]["scale_aug_lo"] = format_real(c.data.scale_aug_lo);
  t["data"]["scale_aug_hi"] = format_real(c.data.scale_aug_hi);
  t["data"]["rotation_aug_deg"] = format_real(c.data.rotation_aug_deg);
  t["ransac"]["iterations"] = std::to_string(c.ransac.iterations);
  t["ransac"]["sample_size"] = std::to_string(c.ransac.sample_size);
  t["ransac"]["threshold_deg"] = format_real(c.ransac.threshold_deg);
  t["eval"]["iou_samples"] = std::to_string(c.eval.iou_samples);
  t["eval"]["symmetric_axis"] = c.eval.symmetric_axis ? "true" : "false";
  t["grid_bench"]["healpix_nside"] = std::to_string(c.grid_bench.healpix_nside);
  t["grid_bench"]["equirect_n"] = std::to_string(c.grid_bench.equirect_n);
  t["grid_bench"]["fibonacci_n"] = std::to_string(c.grid_bench.fibonacci_n);
  t["grid_bench"]["samples"] = std::to_string(c.grid_bench.samples);
  t["grid_bench"]["observations"] = std::to_string(c.grid_bench.observations);
  t["output"]["dir"] = quote(c.output.dir);

  std::ostringstream os;
  for (const auto& [sec, keys] : t) {
    if (!sec.empty()) os << "\n[" << sec << "]\n";
    for (const auto& [k, v] : keys) os << k << " = " << v << '\n';
  }
  return os.str();
}

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a64(serialize_config(c))); }

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace sphcorr

#endif  // SPHCORR_CONFIG_HPP_
