#ifndef SPHCORR_COMMANDS_HPP_
#define SPHCORR_COMMANDS_HPP_

// The command-line subcommands as library calls. Every output file is a pure
// function of (config, seed) plus the build's commit id.

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sphcorr/config.hpp"
#include "sphcorr/dataset.hpp"
#include "sphcorr/errors.hpp"
#include "sphcorr/experiment.hpp"
#include "sphcorr/losses.hpp"
#include "sphcorr/report.hpp"
#include "sphcorr/sphere_grid.hpp"

#ifndef SPHCORR_COMMIT
#define SPHCORR_COMMIT "unknown"
#endif

namespace sphcorr {

namespace fs = std::filesystem;

struct CommandContext {
  ExperimentConfig config;
  std::uint64_t seed = 1;
  fs::path out = "out";
  int threads = 1;
};

inline RunMetadata run_metadata(const CommandContext& ctx, const std::string& command) {
  return {command, config_hash(ctx.config), ctx.seed, SPHCORR_COMMIT};
}

inline Dataset load_dataset(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("dataset " + path.string() + " does not exist");
  return parse_dataset_jsonl(read_text_file(path));
}

inline Manifest cmd_synth(const CommandContext& ctx) {
  const Dataset ds = generate_dataset(ctx.config, ctx.seed, ctx.threads);
  const std::string jsonl = dataset_jsonl(ds);
  const Manifest m = make_manifest(ds, jsonl);
  fs::create_directories(ctx.out);
  write_text_file(ctx.out / "dataset.jsonl", jsonl);
  write_text_file(ctx.out / "manifest.json",
                  manifest_json(m, config_hash(ctx.config), ctx.seed).dump(2) + "\n");
  return m;
}

inline std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::string s = "step,loss,nocs_angle_deg\n";
  for (const auto& r : rows) {
    s += std::to_string(r.step) + "," + format_double(r.loss) + "," + format_double(r.nocs_angle_deg) + "\n";
  }
  return s;
}

inline std::string evals_csv(const std::vector<EvalPoint>& rows) {
  std::string s = "step,mean_rot_err_deg\n";
  for (const auto& r : rows) s += std::to_string(r.step) + "," + format_double(r.mean_rot_err_deg) + "\n";
  return s;
}

inline void write_checkpoint(const fs::path& path, const EncoderParams& p, const ExperimentConfig& c) {
  write_text_file(path, checkpoint_json(p, config_hash(c), c).dump() + "\n");
}

inline EncoderParams load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("checkpoint " + path.string() + " does not exist");
  try {
    return params_from_checkpoint(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

// Writes checkpoint.json, history.csv and (with periodic evaluation)
// evals.csv. On a numeric failure the last finite parameters are written
// before the error propagates.
inline TrainOutcome cmd_train(const CommandContext& ctx, const fs::path& data_path,
                              const ProgressFn& progress = nullptr) {
  const Dataset ds = load_dataset(data_path);
  TrainOutcome t = train_model(ctx.config, ds.train, ds.test, ctx.seed, ctx.threads, progress);
  fs::create_directories(ctx.out);
  write_checkpoint(ctx.out / "checkpoint.json", t.last_good, ctx.config);
  write_text_file(ctx.out / "history.csv", history_csv(t.history));
  if (!t.evals.empty()) write_text_file(ctx.out / "evals.csv", evals_csv(t.evals));
  if (t.aborted) throw NumericFailure(t.error);
  return t;
}

inline std::string predictions_csv(const std::vector<PredictionRecord>& recs) {
  std::ostringstream os;
  os << "category,instance,rot_err_deg,trans_err_m,inlier_ratio,ransac_failed,assigned,r00,r01,r02,r10,r11,r12,r20,"
        "r21,r22\n";
  for (const auto& r : recs) {
    os << r.result.category << ',' << r.result.instance << ','
       << format_double(rotation_error_deg(r.result.pred.r, r.result.gt.r)) << ','
       << format_double(translation_error(r.result)) << ',' << format_double(r.pred.inlier_ratio) << ','
       << (r.pred.ransac_failed ? 1 : 0) << ',' << r.pred.assigned;
    for (double v : r.pred.r.row_major()) os << ',' << format_double(v);
    os << '\n';
  }
  return os.str();
}

// Evaluates on the test split and writes report.json, report.csv and
// predictions.csv. In oracle mode the checkpoint is optional.
inline EvalOutcome cmd_eval(const CommandContext& ctx, const fs::path& data_path, const fs::path& ckpt_path,
                            bool oracle) {
  const Dataset ds = load_dataset(data_path);
  const SphericalGrid grid = experiment_grid(ctx.config);
  EncoderParams params;
  if (oracle && !fs::exists(ckpt_path)) {
    params = init_encoder(encoder_config(ctx.config, grid), derive_seed(ctx.seed, 1));
  } else {
    params = load_checkpoint(ckpt_path);
  }
  if (params.config.cells != grid.size() || params.config.width != ctx.config.model.width) {
    throw ConfigError("checkpoint does not match the configured grid/model");
  }
  EvalOutcome e = evaluate_model(params, ds.test, ctx.config, ctx.seed, oracle, ctx.threads);
  write_report(e.table, run_metadata(ctx, oracle ? "eval --oracle-mode" : "eval"), ctx.out);
  write_text_file(ctx.out / "predictions.csv", predictions_csv(e.records));
  return e;
}

struct GridBenchRow {
  GridKind kind = GridKind::kHealpix;
  int resolution = 0;
  Eigen::Index cells = 0;
  double max_min_ratio = 0.0;
  double solid_angle_total = 0.0;
  double coverage_mean = 0.0;
  double coverage_min = 0.0;
  double coverage_max = 0.0;
};

// Cell count, Monte-Carlo area ratio and assigned-anchor coverage on sampled
// observations (ground-truth normalized) for each grid kind.
inline std::vector<GridBenchRow> cmd_grid_bench(const CommandContext& ctx) {
  const auto& gb = ctx.config.grid_bench;
  const std::vector<std::pair<GridKind, int>> kinds = {{GridKind::kHealpix, gb.healpix_nside},
                                                       {GridKind::kEquirectangular, gb.equirect_n},
                                                       {GridKind::kFibonacci, gb.fibonacci_n}};
  std::vector<Observation> obs(gb.observations);
  std::vector<Points> normalized(obs.size());
  const auto& cats = ctx.config.data.categories;
  parallel_for(obs.size(), ctx.threads, [&](std::size_t i) {
    obs[i] = synthesize_instance(parse_category(cats[i % cats.size()]), static_cast<int>(i), derive_seed(ctx.seed, 5),
                                 ctx.config.data);
    normalized[i] = normalize_points(obs[i].points, obs[i].gt.t, obs[i].gt.s);
  });

  std::vector<GridBenchRow> rows(kinds.size());
  parallel_for(kinds.size(), ctx.threads, [&](std::size_t k) {
    const SphericalGrid g = SphericalGrid::build(kinds[k].first, kinds[k].second);
    GridBenchRow& row = rows[k];
    row.kind = kinds[k].first;
    row.resolution = kinds[k].second;
    row.cells = g.size();
    const SolidAngleStats st = solid_angle_stats(g, gb.samples, derive_seed(ctx.seed, 6 + k));
    row.max_min_ratio = st.max_min_ratio;
    row.solid_angle_total = st.total;
    if (!obs.empty()) {
      row.coverage_min = 1.0;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        const SphericalFeatureMap m = project_to_sphere(g, normalized[i], Matrix::Zero(normalized[i].rows(), 1));
        const double f = static_cast<double>(m.assigned_count()) / static_cast<double>(g.size());
        row.coverage_mean += f / static_cast<double>(obs.size());
        row.coverage_min = std::min(row.coverage_min, f);
        row.coverage_max = std::max(row.coverage_max, f);
      }
    }
  });

  std::string csv = "kind,resolution,cells,max_min_ratio,solid_angle_total,coverage_mean,coverage_min,coverage_max\n";
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  const RunMetadata meta = run_metadata(ctx, "grid-bench");
  j["config_hash"] = meta.config_hash;
  j["seed"] = meta.seed;
  j["commit"] = meta.commit;
  j["samples"] = gb.samples;
  j["observations"] = gb.observations;
  j["grids"] = nlohmann::json::array();
  for (const auto& r : rows) {
    csv += std::string(to_string(r.kind)) + "," + std::to_string(r.resolution) + "," + std::to_string(r.cells) + "," +
           format_double(r.max_min_ratio) + "," + format_double(r.solid_angle_total) + "," +
           format_double(r.coverage_mean) + "," + format_double(r.coverage_min) + "," +
           format_double(r.coverage_max) + "\n";
    j["grids"].push_back({{"kind", std::string(to_string(r.kind))},
                          {"resolution", r.resolution},
                          {"cells", r.cells},
                          {"max_min_ratio", r.max_min_ratio},
                          {"solid_angle_total", r.solid_angle_total},
                          {"coverage_mean", r.coverage_mean},
                          {"coverage_min", r.coverage_min},
                          {"coverage_max", r.coverage_max}});
  }
  fs::create_directories(ctx.out);
  write_text_file(ctx.out / "grid_bench.csv", csv);
  write_text_file(ctx.out / "grid_bench.json", j.dump(2) + "\n");
  return rows;
}

// Loss value and slope of every kind on e = 0, 0.001, ..., 1.
inline std::string loss_bench_csv() {
  std::string s = "e";
  for (LossKind k : kAllLossKinds) s += "," + std::string(to_string(k)) + "," + std::string(to_string(k)) + "_grad";
  s += "\n";
  for (int i = 0; i <= 1000; ++i) {
    const double e = i / 1000.0;
    s += format_double(e);
    for (LossKind k : kAllLossKinds) s += "," + format_double(loss_of_error(k, e)) + "," + format_double(loss_slope(k, e));
    s += "\n";
  }
  return s;
}

inline void cmd_loss_bench(const CommandContext& ctx) {
  fs::create_directories(ctx.out);
  write_text_file(ctx.out / "loss_bench.csv", loss_bench_csv());
}

}  // namespace sphcorr

#endif  // SPHCORR_COMMANDS_HPP_
