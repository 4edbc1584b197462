#ifndef SPHCORR_PIPELINE_HPP_
#define SPHCORR_PIPELINE_HPP_

// Inference: observation -> normalized cloud -> invariant features -> sphere
// projection -> encoder + NOCS head -> robust rotation fit.

#include <string>

#include "sphcorr/encoder.hpp"
#include "sphcorr/errors.hpp"
#include "sphcorr/features.hpp"
#include "sphcorr/pose_fit.hpp"
#include "sphcorr/scene.hpp"
#include "sphcorr/so3.hpp"
#include "sphcorr/sphere_grid.hpp"
#include "sphcorr/spherical.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

struct PipelineConfig {
  FeatureConfig features;
  RansacConfig ransac;
  double size_inflation = 1.25;
};

struct PreparedInput {
  Points normalized;
  PointFeatures features;
  SphericalFeatureMap map;
};

inline PreparedInput prepare_input(const Points& points, const Colors& colors, const Vec3& t, const Vec3& s,
                                   const SphericalGrid& grid, const FeatureConfig& fcfg) {
  PreparedInput in;
  in.normalized = normalize_points(points, t, s);
  in.features = assemble_features(in.normalized, colors, fcfg);
  in.map = project_to_sphere(grid, in.normalized, in.features);
  return in;
}

struct Prediction {
  Rotation r;
  Vec3 t = Vec3::Zero();
  Vec3 s = Vec3::Zero();
  Points o;          // predicted spherical NOCS, M x 3
  Vector residuals;  // angle(O_m, R^T A_m), radians
  double inlier_ratio = 0.0;
  bool low_support = false;
  bool ransac_failed = false;  // rotation fell back to Procrustes on all anchors
  int assigned = 0;
  int guard_hits = 0;
};

// With `oracle` set, ground-truth translation, size and spherical NOCS replace
// the estimated ones, exercising only the solver path.
inline Prediction predict_rotation(const EncoderParams& params, const Observation& obs, const SphericalGrid& grid,
                                   const PipelineConfig& cfg, bool oracle = false) {
  if (params.epos.rows() != grid.size()) {
    throw InvalidArgument("model expects " + std::to_string(params.epos.rows()) + " anchors, grid has " +
                          std::to_string(grid.size()));
  }
  Prediction out;
  if (oracle) {
    out.t = obs.gt.t;
    out.s = obs.gt.s;
  } else {
    const TranslationSize ts = estimate_translation_size(obs.points, cfg.size_inflation);
    out.t = ts.t;
    out.s = ts.s;
  }
  const PreparedInput in = prepare_input(obs.points, obs.colors, out.t, out.s, grid, cfg.features);
  out.assigned = in.map.assigned_count();
  if (oracle) {
    out.o = gt_spherical_nocs(obs.gt.r, grid);
  } else {
    NocsOutput head = predict_nocs(params, in.map.features);
    out.o = std::move(head.o);
    out.guard_hits = head.guard_hits;
  }

  const CorrespondenceSet corr{grid.anchors(), out.o, Vector()};
  try {
    RansacResult rr = ransac_rotation(corr, cfg.ransac);
    out.r = rr.r;
    out.inlier_ratio = rr.inlier_ratio;
    out.low_support = rr.low_support;
  } catch (const RobustFitFailure&) {
    out.r = procrustes_rotation(corr);
    out.ransac_failed = true;
    out.low_support = true;
  }
  out.residuals = angular_residuals(corr, out.r);

  if (!oracle) {
    // Box size measured along the predicted object axes.
    const Points local = (obs.points.rowwise() - out.t.transpose()) * out.r.matrix();
    out.s = cfg.size_inflation * (local.colwise().maxCoeff() - local.colwise().minCoeff()).transpose();
  }
  return out;
}

}  // namespace sphcorr

#endif  // SPHCORR_PIPELINE_HPP_
