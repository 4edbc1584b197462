#ifndef SPHCORR_FEATURES_HPP_
#define SPHCORR_FEATURES_HPP_

// Per-point rotation-invariant features: color, radius and kNN-relative
// geometry. Absolute coordinates never enter the output unless the
// `inject_xyz` ablation toggle is set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sphcorr/errors.hpp"
#include "sphcorr/rng.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

struct FeatureConfig {
  int width = 32;  // C, total channels
  int k = 8;       // neighbors
  double distance_gain = 10.0;
  std::uint64_t projection_seed = 0x5eed;
  bool inject_xyz = false;  // ablation: breaks invariance on purpose
};

struct PointFeatures {
  Matrix values;  // N x C
  // Channel layout: [color | radius | local geometry].
  static constexpr int kColorOffset = 0;
  static constexpr int kColorWidth = 3;
  static constexpr int kRadiusOffset = 3;
  static constexpr int kGeomOffset = 4;
  int geom_width = 0;
};

inline Vector radius_feature(const Points& p) { return p.rowwise().norm(); }

// k nearest neighbors of every point (self excluded), ordered by distance and
// then by index, so exact ties resolve to the lowest index.
inline std::vector<std::vector<std::pair<double, int>>> knn(const Points& p, int k) {
  const int n = static_cast<int>(p.rows());
  if (k < 1 || k >= n) throw InvalidArgument("kNN requires 1 <= k < N");
  std::vector<std::vector<std::pair<double, int>>> out(n);
  std::vector<std::pair<double, int>> cand(n - 1);
  for (int i = 0; i < n; ++i) {
    const double xi = p(i, 0), yi = p(i, 1), zi = p(i, 2);
    int c = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = p(j, 0) - xi, dy = p(j, 1) - yi, dz = p(j, 2) - zi;
      cand[c++] = {dx * dx + dy * dy + dz * dz, j};
    }
    std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
    std::sort(cand.begin(), cand.begin() + k);
    out[i].assign(cand.begin(), cand.begin() + k);
  }
  return out;
}

inline int raw_descriptor_width(const FeatureConfig& cfg) { return cfg.k + 3 + (cfg.inject_xyz ? 3 : 0); }

// Unmapped local descriptor: ascending neighbor distances, then the mean
// neighbor color difference per channel (and raw xyz when injected).
inline Matrix knn_raw_descriptor(const Points& p, const Colors& colors, const FeatureConfig& cfg) {
  if (colors.rows() != p.rows()) throw InvalidArgument("points and colors differ in length");
  const auto nn = knn(p, cfg.k);
  const Eigen::Index n = p.rows();
  Matrix raw(n, raw_descriptor_width(cfg));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVector3d dc = Eigen::RowVector3d::Zero();
    for (int j = 0; j < cfg.k; ++j) {
      raw(i, j) = std::sqrt(nn[i][j].first);
      dc += colors.row(nn[i][j].second) - colors.row(i);
    }
    raw.block(i, cfg.k, 1, 3) = dc / cfg.k;
    if (cfg.inject_xyz) raw.block(i, cfg.k + 3, 1, 3) = p.row(i);
  }
  return raw;
}

// Fixed (seeded, not learned) linear map from the raw descriptor to the
// local-geometry channels. Distance rows carry `distance_gain`.
inline Matrix local_geometry_map(const FeatureConfig& cfg) {
  const int raw = raw_descriptor_width(cfg);
  const int out = cfg.width - 4;
  Matrix m(raw, out);
  Rng rng(cfg.projection_seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(raw));
  for (int i = 0; i < raw; ++i) {
    const double gain = i < cfg.k ? cfg.distance_gain : 1.0;
    for (int j = 0; j < out; ++j) m(i, j) = gain * s * rng.normal();
  }
  return m;
}

inline Matrix local_geometry_feature(const Points& p, const Colors& colors, const FeatureConfig& cfg) {
  if (cfg.width < 5) throw InvalidArgument("feature width must be at least 5");
  return knn_raw_descriptor(p, colors, cfg) * local_geometry_map(cfg);
}

inline PointFeatures assemble_features(const Points& p, const Colors& colors, const FeatureConfig& cfg) {
  if (colors.rows() != p.rows()) throw InvalidArgument("points and colors differ in length");
  const Eigen::Index n = p.rows();
  PointFeatures f;
  f.geom_width = cfg.width - 4;
  f.values.resize(n, cfg.width);
  f.values.leftCols(3) = colors;
  f.values.col(PointFeatures::kRadiusOffset) = radius_feature(p);
  f.values.rightCols(f.geom_width) = local_geometry_feature(p, colors, cfg);
  return f;
}

}  // namespace sphcorr

#endif  // SPHCORR_FEATURES_HPP_
