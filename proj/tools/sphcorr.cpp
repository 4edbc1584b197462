// Command-line front end: synth | train | eval | grid-bench | loss-bench.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sphcorr/commands.hpp"
#include "sphcorr/config.hpp"
#include "sphcorr/errors.hpp"
#include "sphcorr/features.hpp"
#include "sphcorr/scene.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
  bool oracle = false;
  std::string grid;
  std::string loss;
  std::string data;
  std::string checkpoint;
  std::optional<int> per_category;
  std::optional<std::uint64_t> split_seed;
  std::string dump_features;
  bool quiet = false;
};

sphcorr::CommandContext make_context(const Flags& f) {
  sphcorr::CommandContext ctx;
  if (!f.config.empty()) ctx.config = sphcorr::load_config(f.config);
  if (!f.grid.empty()) {
    try {
      ctx.config.grid.kind = sphcorr::parse_grid_kind(f.grid);
    } catch (const sphcorr::InvalidArgument& e) {
      throw sphcorr::ConfigError(e.what());
    }
  }
  if (!f.loss.empty()) {
    try {
      ctx.config.training.loss = sphcorr::parse_loss_kind(f.loss);
    } catch (const sphcorr::InvalidArgument& e) {
      throw sphcorr::ConfigError(e.what());
    }
  }
  const int ncat = static_cast<int>(ctx.config.data.categories.size());
  if (f.per_category) ctx.config.data.train_instances = *f.per_category * ncat;
  if (f.split_seed) ctx.config.data.split_seed = *f.split_seed;
  if (f.seed) ctx.config.seed = *f.seed;
  sphcorr::validate(ctx.config);
  ctx.seed = ctx.config.seed;
  ctx.out = f.out.empty() ? std::filesystem::path(ctx.config.output.dir) : std::filesystem::path(f.out);
  if (f.threads < 1) throw sphcorr::ConfigError("--threads must be >= 1");
  ctx.threads = f.threads;
  return ctx;
}

std::filesystem::path or_default(const std::string& flag, const std::filesystem::path& fallback) {
  return flag.empty() ? fallback : std::filesystem::path(flag);
}

void dump_features(const sphcorr::CommandContext& ctx, const std::filesystem::path& path) {
  const sphcorr::Dataset ds = sphcorr::load_dataset(ctx.out / "dataset.jsonl");
  if (ds.train.empty()) throw sphcorr::DataError("no training record to dump");
  const sphcorr::Observation& o = ds.train.front();
  const sphcorr::Points p = sphcorr::normalize_points(o.points, o.gt.t, o.gt.s);
  const sphcorr::PointFeatures f = sphcorr::assemble_features(p, o.colors, sphcorr::feature_config(ctx.config));
  std::string csv = "index";
  for (Eigen::Index c = 0; c < f.values.cols(); ++c) csv += ",c" + std::to_string(c);
  csv += "\n";
  for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
    csv += std::to_string(i);
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) csv += "," + sphcorr::format_double(f.values(i, c));
    csv += "\n";
  }
  sphcorr::write_text_file(path, csv);
}

int run(const std::string& command, const Flags& f) {
  const sphcorr::CommandContext ctx = make_context(f);
  if (command == "synth") {
    const sphcorr::Manifest m = sphcorr::cmd_synth(ctx);
    if (!f.dump_features.empty()) dump_features(ctx, f.dump_features);
    std::cout << "wrote " << m.records << " records (" << m.train << " train, " << m.test << " test), hash "
              << m.hash << "\n";
  } else if (command == "train") {
    const auto data = or_default(f.data, ctx.out / "dataset.jsonl");
    const long steps = ctx.config.training.steps;
    sphcorr::ProgressFn progress;
    if (!f.quiet) {
      progress = [steps](const sphcorr::HistoryRow& r) {
        if (r.step % 100 == 0 || r.step == steps) {
          std::fprintf(stderr, "step %ld/%ld loss %.6f nocs %.3f deg\n", r.step, steps, r.loss, r.nocs_angle_deg);
        }
      };
    }
    const sphcorr::TrainOutcome t = sphcorr::cmd_train(ctx, data, progress);
    std::cout << "trained " << steps << " steps, final loss " << t.history.back().loss << ", nocs angle "
              << t.history.back().nocs_angle_deg << " deg\n";
  } else if (command == "eval") {
    const auto data = or_default(f.data, ctx.out / "dataset.jsonl");
    const auto ckpt = or_default(f.checkpoint, ctx.out / "checkpoint.json");
    const sphcorr::EvalOutcome e = sphcorr::cmd_eval(ctx, data, ckpt, f.oracle);
    std::cout << sphcorr::metric_csv(e.table);
    if (e.ransac_failures > 0) std::cout << e.ransac_failures << " RANSAC failures (Procrustes fallback)\n";
  } else if (command == "grid-bench") {
    for (const auto& r : sphcorr::cmd_grid_bench(ctx)) {
      std::cout << sphcorr::to_string(r.kind) << ": " << r.cells << " cells, max/min area " << r.max_min_ratio
                << ", coverage " << r.coverage_mean << "\n";
    }
  } else if (command == "loss-bench") {
    sphcorr::cmd_loss_bench(ctx);
    std::cout << "wrote " << (ctx.out / "loss_bench.csv").string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherical correspondence rotation estimation on synthetic objects"};
  app.require_subcommand(1);
  Flags f;
  auto add_common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "Config file (TOML subset)");
    sub->add_option("--seed", f.seed, "Run seed (overrides the config)");
    sub->add_option("--out", f.out, "Output directory (overrides output.dir)");
    sub->add_option("--threads", f.threads, "Worker threads; results do not depend on it");
    sub->add_option("--grid", f.grid, "Grid kind: healpix | equirectangular | fibonacci");
    sub->add_option("--loss", f.loss, "Loss kind: l1 | smooth_l1 | hyp_l1 | l2 | hyp_l2");
    sub->add_flag("--quiet", f.quiet, "Suppress progress output");
  };
  CLI::App* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
  CLI::App* train = app.add_subcommand("train", "Train the correspondence model");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  CLI::App* grid = app.add_subcommand("grid-bench", "Compare sphere grids");
  CLI::App* loss = app.add_subcommand("loss-bench", "Tabulate losses and gradients");
  for (CLI::App* sub : {synth, train, eval, grid, loss}) add_common(sub);
  synth->add_option("--per-category", f.per_category, "Training instances per category");
  synth->add_option("--split-seed", f.split_seed, "Train/test split seed");
  synth->add_option("--dump-features", f.dump_features, "Write invariant features of the first record as CSV");
  train->add_option("--data", f.data, "Dataset file (default <out>/dataset.jsonl)");
  eval->add_option("--data", f.data, "Dataset file (default <out>/dataset.jsonl)");
  eval->add_option("--checkpoint", f.checkpoint, "Checkpoint (default <out>/checkpoint.json)");
  eval->add_flag("--oracle-mode", f.oracle, "Inject ground-truth correspondences, translation and size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, f);
  } catch (const sphcorr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const sphcorr::NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const sphcorr::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const sphcorr::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
}
