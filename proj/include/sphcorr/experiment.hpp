#ifndef SPHCORR_EXPERIMENT_HPP_
#define SPHCORR_EXPERIMENT_HPP_

// End-to-end training and evaluation on a synthetic dataset, plus the
// checkpoint format.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sphcorr/config.hpp"
#include "sphcorr/dataset.hpp"
#include "sphcorr/encoder.hpp"
#include "sphcorr/errors.hpp"
#include "sphcorr/features.hpp"
#include "sphcorr/metrics.hpp"
#include "sphcorr/pipeline.hpp"
#include "sphcorr/pose_fit.hpp"
#include "sphcorr/scene.hpp"
#include "sphcorr/so3.hpp"
#include "sphcorr/sphere_grid.hpp"
#include "sphcorr/spherical.hpp"
#include "sphcorr/training.hpp"

namespace sphcorr {

inline FeatureConfig feature_config(const ExperimentConfig& c) {
  FeatureConfig f;
  f.width = c.model.width;
  f.k = c.features.k;
  f.distance_gain = c.features.distance_gain;
  f.projection_seed = c.features.projection_seed;
  f.inject_xyz = c.features.inject_xyz;
  return f;
}

inline SphericalGrid experiment_grid(const ExperimentConfig& c) {
  try {
    return SphericalGrid::build(c.grid.kind, c.grid.resolution);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

inline EncoderConfig encoder_config(const ExperimentConfig& c, const SphericalGrid& grid) {
  EncoderConfig e;
  e.layers = c.model.layers;
  e.width = c.model.width;
  e.hidden = c.model.hidden;
  e.cells = static_cast<int>(grid.size());
  e.epos_sigma = c.model.epos_sigma;
  return e;
}

inline PipelineConfig pipeline_config(const ExperimentConfig& c, std::uint64_t seed) {
  PipelineConfig p;
  p.features = feature_config(c);
  p.ransac.iterations = c.ransac.iterations;
  p.ransac.sample_size = c.ransac.sample_size;
  p.ransac.inlier_threshold = deg2rad(c.ransac.threshold_deg);
  p.ransac.seed = seed;
  p.size_inflation = c.data.size_inflation;
  return p;
}

inline AugmentRanges augment_ranges(const ExperimentConfig& c) {
  AugmentRanges a;
  a.translation = c.data.translation_aug;
  a.scale_lo = c.data.scale_aug_lo;
  a.scale_hi = c.data.scale_aug_hi;
  a.rotation_deg = c.data.rotation_aug_deg;
  return a;
}

// Training-time view of one observation: normalized points (object centered)
// and their invariant features, which stay valid under any rotation.
struct CachedInstance {
  Points normalized;
  Matrix features;
  Rotation r;
};

inline CachedInstance cache_instance(const Observation& o, const ExperimentConfig& c) {
  CachedInstance ci;
  Vec3 t = o.gt.t, s = o.gt.s;
  if (c.training.normalization == "estimated") {
    const TranslationSize ts = estimate_translation_size(o.points, c.data.size_inflation);
    t = ts.t;
    s = ts.s;
  }
  ci.normalized = normalize_points(o.points, t, s);
  ci.features = assemble_features(ci.normalized, o.colors, feature_config(c)).values;
  ci.r = o.gt.r;
  return ci;
}

// The perturbation of augment(): a rotation about the object center. Under
// object-centered normalization its translation and scale parts cancel, so a
// cached instance only needs rotating.
inline Rotation augmentation_rotation(const AugmentRanges& a, std::uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < 4; ++i) rng.uniform();  // translation and scale draws
  const double ax = deg2rad(rng.uniform(0.0, a.rotation_deg));
  const double ay = deg2rad(rng.uniform(0.0, a.rotation_deg));
  const double az = deg2rad(rng.uniform(0.0, a.rotation_deg));
  return rot_z(az) * rot_y(ay) * rot_x(ax);
}

inline TrainSample make_sample(const CachedInstance& ci, const Rotation& dr, const SphericalGrid& grid) {
  TrainSample s;
  s.map = project_to_sphere(grid, apply(dr, ci.normalized), ci.features);
  s.o_gt = gt_spherical_nocs(dr * ci.r, grid);
  return s;
}

struct HistoryRow {
  long step = 0;
  double loss = 0.0;
  double nocs_angle_deg = 0.0;
};

struct EvalPoint {
  long step = 0;
  double mean_rot_err_deg = 0.0;
};

struct TrainOutcome {
  EncoderParams params;
  EncoderParams last_good;  // equals params unless training aborted
  std::vector<HistoryRow> history;
  std::vector<EvalPoint> evals;
  bool aborted = false;
  std::string error;
};

struct PredictionRecord {
  Prediction pred;
  PoseResult result;
};

// Predictions for every observation, in input order.
inline std::vector<PredictionRecord> predict_all(const EncoderParams& params, const std::vector<Observation>& obs,
                                                 const SphericalGrid& grid, const ExperimentConfig& c,
                                                 std::uint64_t seed, bool oracle, int threads) {
  std::vector<PredictionRecord> out(obs.size());
  parallel_for(obs.size(), threads, [&](std::size_t i) {
    const Observation& o = obs[i];
    const PipelineConfig pc = pipeline_config(c, derive_seed(seed, static_cast<std::uint64_t>(o.instance)));
    PredictionRecord& rec = out[i];
    rec.pred = predict_rotation(params, o, grid, pc, oracle);
    rec.result.pred = ObjectPose{rec.pred.r, rec.pred.t, rec.pred.s};
    rec.result.gt = o.gt;
    rec.result.category = std::string(to_string(o.category));
    rec.result.instance = o.instance;
    rec.result.inlier_ratio = rec.pred.inlier_ratio;
    const NocsErrors ne = mean_nocs_errors(rec.pred.o, gt_spherical_nocs(o.gt.r, grid));
    rec.result.nocs_angle_deg = ne.angle_deg;
    rec.result.nocs_distance = ne.distance;
  });
  return out;
}

inline double mean_rotation_error_deg(const std::vector<PredictionRecord>& recs) {
  double s = 0.0;
  for (const auto& r : recs) s += rotation_error_deg(r.result.pred.r, r.result.gt.r);
  return recs.empty() ? 0.0 : s / static_cast<double>(recs.size());
}

using ProgressFn = std::function<void(const HistoryRow&)>;

// Optional early exit; the learning-rate schedule still spans training.steps.
struct TrainControl {
  long step_limit = -1;         // stop after this many updates; < 0 runs the schedule out
  double stop_below_deg = 0.0;  // stop once a held-out evaluation is at or below this; 0 disables
};

// Trains from a fresh initialization. History holds steps + 1 rows: row k is
// the pre-update loss on batch k. With training.eval_every > 0 the mean
// rotation error on the first eval_instances observations of `held_out` is
// recorded every eval_every steps (and at the end). A non-finite loss or
// gradient stops training with aborted = true and last_good set to the last
// finite parameters.
inline TrainOutcome train_model(const ExperimentConfig& c, const std::vector<Observation>& train,
                                const std::vector<Observation>& held_out, std::uint64_t seed, int threads,
                                const ProgressFn& progress = nullptr, const TrainControl& control = {}) {
  if (train.empty()) throw DataError("training split is empty");
  const SphericalGrid grid = experiment_grid(c);
  TrainOutcome out;
  out.params = init_encoder(encoder_config(c, grid), derive_seed(seed, 1));
  out.last_good = out.params;

  std::vector<CachedInstance> cache(train.size());
  parallel_for(train.size(), threads, [&](std::size_t i) { cache[i] = cache_instance(train[i], c); });

  std::vector<Observation> eval_set(held_out.begin(),
                                    held_out.begin() + std::min<std::size_t>(held_out.size(), c.training.eval_instances));
  auto record_eval = [&](long step) {
    if (c.training.eval_every <= 0 || eval_set.empty()) return;
    const auto recs = predict_all(out.params, eval_set, grid, c, derive_seed(seed, 3), false, threads);
    out.evals.push_back({step, mean_rotation_error_deg(recs)});
  };

  const AugmentRanges aug = augment_ranges(c);
  AdamState adam = AdamState::for_params(out.params);
  StepOptions opt;
  opt.loss = c.training.loss;
  opt.mask_weighted = c.training.mask_weighted;
  opt.clip_norm = c.training.clip_norm;
  opt.threads = threads;
  const long steps = c.training.steps;
  const long last = control.step_limit >= 0 ? std::min<long>(steps, control.step_limit) : steps;
  for (long step = 0; step <= last; ++step) {
    if (c.training.eval_every > 0 && step % c.training.eval_every == 0) {
      record_eval(step);
      if (control.stop_below_deg > 0.0 && !out.evals.empty() &&
          out.evals.back().mean_rot_err_deg <= control.stop_below_deg) {
        return out;
      }
    }
    Rng rng(derive_seed(derive_seed(seed, 2), static_cast<std::uint64_t>(step)));
    std::vector<TrainSample> batch(c.training.batch);
    std::vector<std::size_t> idx(batch.size());
    std::vector<Rotation> dr(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      idx[b] = rng.below(cache.size());
      const std::uint64_t aug_seed = rng.next_u64();
      if (c.training.augment) {
        if (c.training.so3_augment) {
          Rng arng(aug_seed);
          dr[b] = random_rotation(arng);
        } else {
          dr[b] = augmentation_rotation(aug, aug_seed);
        }
      }
    }
    parallel_for(batch.size(), threads, [&](std::size_t b) { batch[b] = make_sample(cache[idx[b]], dr[b], grid); });
    HistoryRow row;
    row.step = step;
    try {
      if (step < last) {
        const double lr = c.training.schedule == "cosine" ? cosine_lr(c.training.lr, step, steps) : c.training.lr;
        const StepMetrics m = train_step(out.params, batch, adam, lr, opt);
        row.loss = m.loss;
        row.nocs_angle_deg = m.nocs_angle_deg;
        if (!out.params.all_finite()) throw NumericFailure("parameters became non-finite at step " + std::to_string(step));
      } else {
        const SampleGradient g = batch_gradient(out.params, batch, opt.loss, opt.mask_weighted, threads);
        row.loss = g.loss;
        row.nocs_angle_deg = g.nocs_angle_deg;
      }
    } catch (const NumericFailure& e) {
      out.aborted = true;
      out.error = std::string(e.what()) + " (step " + std::to_string(step) + ")";
      out.params = out.last_good;
      return out;
    }
    out.last_good = out.params;
    out.history.push_back(row);
    if (progress) progress(row);
  }
  if (c.training.eval_every > 0 && last % c.training.eval_every != 0) record_eval(last);
  return out;
}

struct EvalOutcome {
  std::vector<PredictionRecord> records;
  MetricTable table;
  int ransac_failures = 0;
  int low_support = 0;
};

inline EvalOutcome evaluate_model(const EncoderParams& params, const std::vector<Observation>& test,
                                  const ExperimentConfig& c, std::uint64_t seed, bool oracle, int threads) {
  if (test.empty()) throw DataError("evaluation split is empty");
  const SphericalGrid grid = experiment_grid(c);
  EvalOutcome out;
  out.records = predict_all(params, test, grid, c, derive_seed(seed, 3), oracle, threads);
  std::vector<PoseResult> results;
  for (const auto& r : out.records) {
    results.push_back(r.result);
    out.ransac_failures += r.pred.ransac_failed;
    out.low_support += r.pred.low_support;
  }
  MetricOptions mo;
  mo.iou_samples = c.eval.iou_samples;
  mo.seed = derive_seed(seed, 4);
  mo.symmetric_axis = c.eval.symmetric_axis;
  out.table = compute_metric_table(results, c.data.categories, mo);
  return out;
}

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_json(const EncoderParams& p, const std::string& cfg_hash, const ExperimentConfig& c) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["config_hash"] = cfg_hash;
  j["grid"] = {{"kind", std::string(to_string(c.grid.kind))}, {"resolution", c.grid.resolution}};
  j["model"] = {{"layers", p.config.layers},
                {"width", p.config.width},
                {"hidden", p.config.hidden},
                {"cells", p.config.cells},
                {"epos_sigma", p.config.epos_sigma}};
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, m] : p.tensors()) {
    std::vector<double> data(m->size());
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index k = 0; k < m->cols(); ++k) data[r * m->cols() + k] = (*m)(r, k);
    }
    tensors[name] = {{"rows", m->rows()}, {"cols", m->cols()}, {"data", std::move(data)}};
  }
  j["tensors"] = std::move(tensors);
  return j;
}

inline EncoderParams params_from_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    EncoderConfig ec;
    const auto& m = j.at("model");
    ec.layers = m.at("layers").get<int>();
    ec.width = m.at("width").get<int>();
    ec.hidden = m.at("hidden").get<int>();
    ec.cells = m.at("cells").get<int>();
    ec.epos_sigma = m.at("epos_sigma").get<double>();
    EncoderParams p = init_encoder(ec, 0);
    for (auto& [name, t] : p.tensors()) {
      const auto& e = j.at("tensors").at(name);
      const auto rows = e.at("rows").get<Eigen::Index>(), cols = e.at("cols").get<Eigen::Index>();
      const auto data = e.at("data").get<std::vector<double>>();
      if (rows != t->rows() || cols != t->cols() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw DataError("checkpoint tensor " + name + " has the wrong shape");
      }
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index k = 0; k < cols; ++k) (*t)(r, k) = data[r * cols + k];
      }
    }
    if (!p.all_finite()) throw DataError("checkpoint holds non-finite parameters");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace sphcorr

#endif  // SPHCORR_EXPERIMENT_HPP_
