#ifndef SPHCORR_METRICS_HPP_
#define SPHCORR_METRICS_HPP_

// Pose accuracy at rotation/translation thresholds, Monte-Carlo oriented-box
// IoU, mean NOCS errors and the per-category metric table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "sphcorr/errors.hpp"
#include "sphcorr/rng.hpp"
#include "sphcorr/scene.hpp"
#include "sphcorr/so3.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

struct PoseResult {
  ObjectPose pred;
  ObjectPose gt;
  std::string category;
  int instance = 0;
  double inlier_ratio = 0.0;
  double nocs_angle_deg = 0.0;  // mean over anchors
  double nocs_distance = 0.0;   // mean over anchors
};

// With `symmetric_axis`, only the object's y axis is compared, which ignores
// the free spin of rotationally symmetric categories.
inline double rotation_error_deg(const Rotation& pred, const Rotation& gt, bool symmetric_axis = false) {
  if (!symmetric_axis) return rad2deg(geodesic_angle(pred, gt));
  return rad2deg(vector_angle(pred.matrix().col(1), gt.matrix().col(1)));
}

inline double translation_error(const PoseResult& r) { return (r.pred.t - r.gt.t).norm(); }

// Percentage of results with rotation error < rot_deg and translation error
// < trans_m (meters).
inline double pose_accuracy(const std::vector<PoseResult>& results, double rot_deg, double trans_m,
                            bool symmetric_axis = false) {
  if (results.empty()) throw InvalidArgument("pose_accuracy of an empty result list");
  std::size_t hits = 0;
  for (const auto& r : results) {
    if (rotation_error_deg(r.pred.r, r.gt.r, symmetric_axis) < rot_deg && translation_error(r) < trans_m) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(results.size());
}

struct OrientedBox {
  Rotation r;
  Vec3 t = Vec3::Zero();
  Vec3 size = Vec3::Ones();  // full edge lengths along the box axes

  bool contains(const Vec3& p) const {
    const Vec3 local = r.matrix().transpose() * (p - t);
    return (local.cwiseAbs().array() <= 0.5 * size.array()).all();
  }
  Points corners() const {
    Points c(8, 3);
    for (int i = 0; i < 8; ++i) {
      const Vec3 sgn((i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5, (i & 4) ? 0.5 : -0.5);
      c.row(i) = (r * sgn.cwiseProduct(size) + t).transpose();
    }
    return c;
  }
};

// Monte-Carlo IoU: uniform samples in the axis-aligned bounding region of both
// boxes. Returns exactly 0 when no sample lands in both.
inline double box_iou_3d(const OrientedBox& a, const OrientedBox& b, std::int64_t n_samples, std::uint64_t seed) {
  if (!(a.size.minCoeff() > 0.0) || !(b.size.minCoeff() > 0.0)) throw InvalidArgument("box sizes must be positive");
  if (n_samples < 1) throw InvalidArgument("box_iou_3d needs at least one sample");
  const Points ca = a.corners(), cb = b.corners();
  const Vec3 lo = ca.colwise().minCoeff().cwiseMin(cb.colwise().minCoeff()).transpose();
  const Vec3 hi = ca.colwise().maxCoeff().cwiseMax(cb.colwise().maxCoeff()).transpose();
  Rng rng(seed);
  std::int64_t inter = 0, uni = 0;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()));
    const bool in_a = a.contains(p), in_b = b.contains(p);
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double box_iou_3d(const ObjectPose& a, const ObjectPose& b, std::int64_t n_samples, std::uint64_t seed) {
  return box_iou_3d(OrientedBox{a.r, a.t, a.s}, OrientedBox{b.r, b.t, b.s}, n_samples, seed);
}

struct NocsErrors {
  double angle_deg = 0.0;
  double distance = 0.0;
};

inline NocsErrors mean_nocs_errors(const Points& o, const Points& o_gt) {
  if (o.rows() != o_gt.rows() || o.rows() == 0) throw InvalidArgument("NOCS maps must be non-empty and row-aligned");
  NocsErrors e;
  for (Eigen::Index i = 0; i < o.rows(); ++i) {
    e.angle_deg += rad2deg(vector_angle(o.row(i).transpose(), o_gt.row(i).transpose()));
    e.distance += (o.row(i) - o_gt.row(i)).norm();
  }
  e.angle_deg /= static_cast<double>(o.rows());
  e.distance /= static_cast<double>(o.rows());
  return e;
}

// One table row; percentages are in [0, 100].
struct MetricRow {
  std::string category;
  int count = 0;
  double iou25 = 0, iou50 = 0, iou75 = 0;
  double deg5cm2 = 0, deg5cm5 = 0, deg10cm2 = 0, deg10cm5 = 0;
  double rot5 = 0;              // rotation-only accuracy at 5 degrees
  double mean_rot_err_deg = 0;  // mean geodesic error
  double nocs_angle_deg = 0;
  double nocs_distance = 0;

  template <typename F>
  void for_each_value(F&& f) {
    f("iou25", iou25);
    f("iou50", iou50);
    f("iou75", iou75);
    f("deg5cm2", deg5cm2);
    f("deg5cm5", deg5cm5);
    f("deg10cm2", deg10cm2);
    f("deg10cm5", deg10cm5);
    f("rot5", rot5);
    f("mean_rot_err_deg", mean_rot_err_deg);
    f("nocs_angle_deg", nocs_angle_deg);
    f("nocs_distance", nocs_distance);
  }
};

struct MetricTable {
  std::vector<MetricRow> categories;
  MetricRow mean;  // unweighted mean of the category rows, category "mean"
};

struct MetricOptions {
  std::int64_t iou_samples = 100000;
  std::uint64_t seed = 0;
  bool symmetric_axis = false;
};

inline MetricRow metric_row(const std::string& name, const std::vector<PoseResult>& rs,
                            const std::vector<double>& ious, const MetricOptions& opt) {
  MetricRow row;
  row.category = name;
  row.count = static_cast<int>(rs.size());
  if (rs.empty()) return row;
  const double n = static_cast<double>(rs.size());
  for (double iou : ious) {
    row.iou25 += iou >= 0.25;
    row.iou50 += iou >= 0.50;
    row.iou75 += iou >= 0.75;
  }
  row.iou25 *= 100.0 / n;
  row.iou50 *= 100.0 / n;
  row.iou75 *= 100.0 / n;
  row.deg5cm2 = pose_accuracy(rs, 5.0, 0.02, opt.symmetric_axis);
  row.deg5cm5 = pose_accuracy(rs, 5.0, 0.05, opt.symmetric_axis);
  row.deg10cm2 = pose_accuracy(rs, 10.0, 0.02, opt.symmetric_axis);
  row.deg10cm5 = pose_accuracy(rs, 10.0, 0.05, opt.symmetric_axis);
  row.rot5 = pose_accuracy(rs, 5.0, std::numeric_limits<double>::infinity(), opt.symmetric_axis);
  for (const auto& r : rs) {
    row.mean_rot_err_deg += rotation_error_deg(r.pred.r, r.gt.r, opt.symmetric_axis) / n;
    row.nocs_angle_deg += r.nocs_angle_deg / n;
    row.nocs_distance += r.nocs_distance / n;
  }
  return row;
}

// Rows follow `categories` order; categories without results get count 0 and
// are left out of the mean.
inline MetricTable compute_metric_table(const std::vector<PoseResult>& results,
                                        const std::vector<std::string>& categories, const MetricOptions& opt = {}) {
  if (results.empty()) throw InvalidArgument("no results to tabulate");
  std::vector<double> ious(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    ious[i] = box_iou_3d(results[i].pred, results[i].gt, opt.iou_samples, derive_seed(opt.seed, i));
  }
  MetricTable t;
  t.mean.category = "mean";
  std::vector<double> sums;
  int used = 0;
  for (const auto& c : categories) {
    std::vector<PoseResult> rs;
    std::vector<double> ci;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].category == c) {
        rs.push_back(results[i]);
        ci.push_back(ious[i]);
      }
    }
    MetricRow row = metric_row(c, rs, ci, opt);
    if (row.count > 0) {
      ++used;
      t.mean.count += row.count;
      std::size_t k = 0;
      row.for_each_value([&](const char*, double& v) {
        if (sums.size() <= k) sums.push_back(0.0);
        sums[k++] += v;
      });
    }
    t.categories.push_back(std::move(row));
  }
  if (used > 0) {
    std::size_t k = 0;
    t.mean.for_each_value([&](const char*, double& v) { v = sums[k++] / used; });
  }
  return t;
}

}  // namespace sphcorr

#endif  // SPHCORR_METRICS_HPP_
