#ifndef SPHCORR_DATASET_HPP_
#define SPHCORR_DATASET_HPP_

// Synthetic train/test observations and their JSON-lines file format.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sphcorr/config.hpp"
#include "sphcorr/errors.hpp"
#include "sphcorr/rng.hpp"
#include "sphcorr/scene.hpp"
#include "sphcorr/so3.hpp"

namespace sphcorr {

inline constexpr int kDatasetSchemaVersion = 1;

struct Dataset {
  std::vector<Observation> train;
  std::vector<Observation> test;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers; the first exception
// (lowest index) is rethrown after all workers finish.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t nt = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, std::max<std::size_t>(n, 1));
  if (nt == 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += nt) guarded(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// One observation of instance `id`: random shape parameters, a Haar-random
// orientation, a tabletop-range translation in front of the camera (which sits
// at the origin) and a metric size of 0.15-0.35 m along the longest diagonal.
inline Observation synthesize_instance(ShapeCategory category, int id, std::uint64_t seed,
                                       const ExperimentConfig::Data& d) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(id)));
  const std::vector<double> params = random_shape_params(category, rng);
  const ShapeModel shape = make_shape(category, params, d.shape_points, rng.next_u64());
  RenderOptions opt;
  opt.n_points = d.points;
  opt.noise_sigma = d.noise_sigma;
  for (int attempt = 0;; ++attempt) {
    ObjectPose pose;
    pose.r = random_rotation(rng);
    pose.s = shape.extent * rng.uniform(0.15, 0.35);
    pose.t = Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0.6, 1.0));
    const std::uint64_t render_seed = rng.next_u64();
    try {
      Observation obs = render_observation(shape, pose, -pose.t.normalized(), render_seed, opt);
      obs.instance = id;
      obs.seed = render_seed;
      return obs;
    } catch (const DegenerateView&) {
      if (attempt >= 15) throw;
    }
  }
}

// Instances are numbered across the whole pool; category i % n_categories.
// Each category's instances are split into train/test by a permutation drawn
// from `split_seed`, so the split seed changes membership but not counts.
inline Dataset generate_dataset(const ExperimentConfig& c, std::uint64_t seed, int threads = 1) {
  const int ncat = static_cast<int>(c.data.categories.size());
  if (ncat == 0) throw ConfigError("no categories configured");
  const int total = c.data.train_instances + c.data.test_instances;
  std::vector<ShapeCategory> cats;
  for (const auto& s : c.data.categories) cats.push_back(parse_category(s));

  std::vector<Observation> pool(total);
  parallel_for(static_cast<std::size_t>(total), threads, [&](std::size_t i) {
    pool[i] = synthesize_instance(cats[i % ncat], static_cast<int>(i), seed, c.data);
  });

  std::vector<char> is_train(total, 0);
  for (int ci = 0; ci < ncat; ++ci) {
    std::vector<int> ids;
    for (int i = ci; i < total; i += ncat) ids.push_back(i);
    Rng rng(derive_seed(c.data.split_seed, static_cast<std::uint64_t>(ci)));
    for (std::size_t j = ids.size(); j > 1; --j) std::swap(ids[j - 1], ids[rng.below(j)]);
    const int n_train = c.data.train_instances / ncat + (ci < c.data.train_instances % ncat ? 1 : 0);
    for (int j = 0; j < std::min<int>(n_train, static_cast<int>(ids.size())); ++j) is_train[ids[j]] = 1;
  }
  Dataset ds;
  for (int i = 0; i < total; ++i) (is_train[i] ? ds.train : ds.test).push_back(std::move(pool[i]));
  return ds;
}

inline nlohmann::json record_json(const Observation& o, const std::string& split) {
  nlohmann::json j;
  j["split"] = split;
  j["category"] = std::string(to_string(o.category));
  j["instance"] = o.instance;
  j["seed"] = o.seed;
  j["R"] = o.gt.r.row_major();
  j["t"] = {o.gt.t.x(), o.gt.t.y(), o.gt.t.z()};
  j["s"] = {o.gt.s.x(), o.gt.s.y(), o.gt.s.z()};
  std::vector<double> p(o.points.rows() * 3), c(o.colors.rows() * 3);
  for (Eigen::Index i = 0; i < o.points.rows(); ++i) {
    for (int k = 0; k < 3; ++k) {
      p[3 * i + k] = o.points(i, k);
      c[3 * i + k] = o.colors(i, k);
    }
  }
  j["points"] = std::move(p);
  j["colors"] = std::move(c);
  return j;
}

inline Observation record_from_json(const nlohmann::json& j, std::string& split) {
  Observation o;
  split = j.at("split").get<std::string>();
  if (split != "train" && split != "test") throw DataError("record split must be train or test");
  o.category = parse_category(j.at("category").get<std::string>());
  o.instance = j.at("instance").get<int>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.gt.r = Rotation::from_row_major(j.at("R").get<std::array<double, 9>>());
  const auto t = j.at("t").get<std::array<double, 3>>();
  const auto s = j.at("s").get<std::array<double, 3>>();
  o.gt.t = Vec3(t[0], t[1], t[2]);
  o.gt.s = Vec3(s[0], s[1], s[2]);
  if (!(o.gt.s.minCoeff() > 0.0)) throw DataError("record size must be positive");
  const auto p = j.at("points").get<std::vector<double>>();
  const auto c = j.at("colors").get<std::vector<double>>();
  if (p.size() % 3 != 0 || p.size() != c.size() || p.empty()) throw DataError("points/colors arrays malformed");
  const Eigen::Index n = static_cast<Eigen::Index>(p.size() / 3);
  o.points.resize(n, 3);
  o.colors.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      o.points(i, k) = p[3 * i + k];
      o.colors(i, k) = c[3 * i + k];
    }
  }
  o.visible_count = static_cast<int>(n);
  return o;
}

inline std::string dataset_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& o : ds.train) out += record_json(o, "train").dump() + "\n";
  for (const auto& o : ds.test) out += record_json(o, "test").dump() + "\n";
  return out;
}

inline Dataset parse_dataset_jsonl(const std::string& text) {
  Dataset ds;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      std::string split;
      Observation o = record_from_json(nlohmann::json::parse(line), split);
      (split == "train" ? ds.train : ds.test).push_back(std::move(o));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

struct Manifest {
  int records = 0;
  int train = 0;
  int test = 0;
  std::map<std::string, int> per_category;
  std::string hash;  // FNV-1a 64 of the dataset file bytes
};

inline Manifest make_manifest(const Dataset& ds, const std::string& jsonl) {
  Manifest m;
  m.train = static_cast<int>(ds.train.size());
  m.test = static_cast<int>(ds.test.size());
  m.records = m.train + m.test;
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& o : *split) ++m.per_category[std::string(to_string(o.category))];
  }
  m.hash = hex64(fnv1a64(jsonl));
  return m;
}

inline nlohmann::json manifest_json(const Manifest& m, const std::string& cfg_hash, std::uint64_t seed) {
  nlohmann::json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["config_hash"] = cfg_hash;
  j["seed"] = seed;
  j["records"] = m.records;
  j["train"] = m.train;
  j["test"] = m.test;
  j["per_category"] = m.per_category;
  j["hash"] = m.hash;
  return j;
}

}  // namespace sphcorr

#endif  // SPHCORR_DATASET_HPP_
