#ifndef SPHCORR_SCENE_HPP_
#define SPHCORR_SCENE_HPP_

// Synthetic object categories, ground-truth poses, self-occlusion and the
// analytic translation/size estimator used at inference.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "sphcorr/errors.hpp"
#include "sphcorr/rng.hpp"
#include "sphcorr/so3.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

// kSphere is a test primitive with a closed-form visibility fraction; it is
// not part of any dataset preset.
enum class ShapeCategory { kBottle, kMug, kBox, kSphere };

inline std::string_view to_string(ShapeCategory c) {
  switch (c) {
    case ShapeCategory::kBottle: return "bottle";
    case ShapeCategory::kMug: return "mug";
    case ShapeCategory::kBox: return "box";
    case ShapeCategory::kSphere: return "sphere";
  }
  return "?";
}

inline ShapeCategory parse_category(std::string_view s) {
  if (s == "bottle") return ShapeCategory::kBottle;
  if (s == "mug") return ShapeCategory::kMug;
  if (s == "box") return ShapeCategory::kBox;
  if (s == "sphere") return ShapeCategory::kSphere;
  throw InvalidArgument("unknown category '" + std::string(s) + "'");
}

struct ParamRange {
  const char* name;
  double lo;
  double hi;
};

// Documented parameter ranges per category. Bottle: height / body diameter,
// neck radius / body radius, neck height / total height. Mug: height / body
// diameter, handle arc radius / height, handle tube radius / height. Box: the
// three relative edge lengths. Sphere: radius.
inline std::vector<ParamRange> shape_param_ranges(ShapeCategory c) {
  switch (c) {
    case ShapeCategory::kBottle:
      return {{"aspect", 1.5, 4.0}, {"neck_ratio", 0.25, 0.6}, {"neck_fraction", 0.15, 0.4}};
    case ShapeCategory::kMug:
      return {{"aspect", 0.6, 1.6}, {"handle_size", 0.25, 0.45}, {"handle_thickness", 0.04, 0.1}};
    case ShapeCategory::kBox:
      return {{"x", 0.1, 1.0}, {"y", 0.1, 1.0}, {"z", 0.1, 1.0}};
    case ShapeCategory::kSphere:
      return {{"radius", 0.01, 10.0}};
  }
  return {};
}

inline std::vector<double> random_shape_params(ShapeCategory c, Rng& rng) {
  std::vector<double> p;
  for (const auto& r : shape_param_ranges(c)) p.push_back(rng.uniform(r.lo, r.hi));
  return p;
}

// Canonical (NOCS) surface samples of one instance. Points are zero-centered
// and scaled so the bounding-box diagonal is 1, or smaller when needed to keep
// every point inside [-0.5, 0.5]^3.
struct ShapeModel {
  ShapeCategory category = ShapeCategory::kBox;
  std::vector<double> params;
  Points points;
  Points normals;
  Colors colors;
  std::vector<int> part;  // 0 = body, 1 = secondary part (neck / handle)
  Vec3 extent = Vec3::Zero();  // axis-aligned extent of `points`
};

namespace detail {

struct SurfacePatch {
  double area;
  // Returns point and outward normal for uniform (u, v) in [0,1)^2 plus an
  // acceptance flag for rejection-sampled patches.
  std::function<bool(Rng&, Vec3&, Vec3&)> sample;
  int part;
};

inline SurfacePatch cylinder_side(double radius, double y0, double y1, int part) {
  return {2.0 * std::numbers::pi * radius * (y1 - y0),
          [=](Rng& rng, Vec3& p, Vec3& n) {
            const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double y = rng.uniform(y0, y1);
            n = {std::cos(a), 0.0, std::sin(a)};
            p = {radius * n.x(), y, radius * n.z()};
            return true;
          },
          part};
}

// Annulus in the plane y = y0 between radii r0 < r1, normal +-y.
inline SurfacePatch annulus(double r0, double r1, double y0, double ny, int part) {
  return {std::numbers::pi * (r1 * r1 - r0 * r0),
          [=](Rng& rng, Vec3& p, Vec3& n) {
            const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double r = std::sqrt(rng.uniform(r0 * r0, r1 * r1));
            p = {r * std::cos(a), y0, r * std::sin(a)};
            n = {0.0, ny, 0.0};
            return true;
          },
          part};
}

inline SurfacePatch box_face(int axis, double sign, const Vec3& half, int part) {
  const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  return {4.0 * half[a1] * half[a2],
          [=](Rng& rng, Vec3& p, Vec3& n) {
            p[axis] = sign * half[axis];
            p[a1] = rng.uniform(-half[a1], half[a1]);
            p[a2] = rng.uniform(-half[a2], half[a2]);
            n = Vec3::Zero();
            n[axis] = sign;
            return true;
          },
          part};
}

// Half torus in the xy-plane centered at `center`, sweeping the +x side.
// Samples that fall inside the body cylinder of radius `body_r` are rejected.
inline SurfacePatch handle_tube(const Vec3& center, double arc_r, double tube_r, double body_r,
                                int part) {
  const double area = std::numbers::pi * arc_r * 2.0 * std::numbers::pi * tube_r;
  return {area,
          [=](Rng& rng, Vec3& p, Vec3& n) {
            const double u = rng.uniform(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
            const double v = rng.uniform(0.0, 2.0 * std::numbers::pi);
            // Area element is proportional to (arc_r + tube_r cos v).
            if (rng.uniform() * (arc_r + tube_r) > arc_r + tube_r * std::cos(v)) return false;
            const Vec3 radial(std::cos(u), std::sin(u), 0.0);
            n = std::cos(v) * radial + std::sin(v) * Vec3::UnitZ();
            p = center + arc_r * radial + tube_r * n;
            return p.x() * p.x() + p.z() * p.z() > body_r * body_r;
          },
          part};
}

inline std::vector<SurfacePatch> build_patches(ShapeCategory c, const std::vector<double>& q) {
  std::vector<SurfacePatch> s;
  switch (c) {
    case ShapeCategory::kBottle: {
      const double r = 1.0, height = q[0] * 2.0 * r;
      const double rn = q[1] * r, hb = height * (1.0 - q[2]);
      s.push_back(cylinder_side(r, 0.0, hb, 0));
      s.push_back(annulus(0.0, r, 0.0, -1.0, 0));
      s.push_back(annulus(rn, r, hb, 1.0, 0));
      s.push_back(cylinder_side(rn, hb, height, 1));
      s.push_back(annulus(0.0, rn, height, 1.0, 1));
      break;
    }
    case ShapeCategory::kMug: {
      const double r = 1.0, h = q[0] * 2.0 * r;
      s.push_back(cylinder_side(r, 0.0, h, 0));
      s.push_back(annulus(0.0, r, 0.0, -1.0, 0));
      s.push_back(annulus(0.0, r, h, 1.0, 0));
      s.push_back(handle_tube(Vec3(0.9 * r, 0.5 * h, 0.0), q[1] * h, q[2] * h, r, 1));
      break;
    }
    case ShapeCategory::kBox: {
      const Vec3 half(0.5 * q[0], 0.5 * q[1], 0.5 * q[2]);
      for (int axis = 0; axis < 3; ++axis) {
        s.push_back(box_face(axis, 1.0, half, 0));
        s.push_back(box_face(axis, -1.0, half, 0));
      }
      break;
    }
    case ShapeCategory::kSphere: {
      const double radius = q[0];
      s.push_back({4.0 * std::numbers::pi * radius * radius,
                   [=](Rng& rng, Vec3& p, Vec3& n) {
                     do {
                       n = {rng.normal(), rng.normal(), rng.normal()};
                     } while (n.squaredNorm() < 1e-24);
                     n.normalize();
                     p = radius * n;
                     return true;
                   },
                   0});
      break;
    }
  }
  return s;
}

inline Vec3 part_hue(ShapeCategory c) {
  switch (c) {
    case ShapeCategory::kBottle: return {0.15, 0.55, 0.95};
    case ShapeCategory::kMug: return {0.95, 0.25, 0.15};
    default: return {0.5, 0.5, 0.5};
  }
}

}  // namespace detail

// Samples `k_points` surface points of a parametric instance. Colors follow a
// fixed pose-independent scheme: a smooth field over canonical coordinates
// (0.5 + x), blended half-way towards a category hue on the secondary part.
inline ShapeModel make_shape(ShapeCategory category, const std::vector<double>& params,
                             int k_points, std::uint64_t seed) {
  const auto ranges = shape_param_ranges(category);
  if (params.size() != ranges.size()) {
    throw InvalidArgument("expected " + std::to_string(ranges.size()) + " shape parameters for " +
                          std::string(to_string(category)));
  }
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (!(params[i] >= ranges[i].lo && params[i] <= ranges[i].hi)) {
      throw InvalidArgument(std::string("shape parameter '") + ranges[i].name + "' out of range");
    }
  }
  if (k_points < 1) throw InvalidArgument("k_points must be positive");

  const auto patches = detail::build_patches(category, params);
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& p : patches) cumulative.push_back(total += p.area);

  ShapeModel shape;
  shape.category = category;
  shape.params = params;
  shape.points.resize(k_points, 3);
  shape.normals.resize(k_points, 3);
  shape.part.resize(k_points);
  Rng rng(seed);
  for (int i = 0; i < k_points;) {
    const double pick = rng.uniform() * total;
    const auto idx = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
    const auto& patch = patches[std::min(idx, patches.size() - 1)];
    Vec3 p, n;
    if (!patch.sample(rng, p, n)) continue;
    shape.points.row(i) = p.transpose();
    shape.normals.row(i) = n.transpose();
    shape.part[i] = patch.part;
    ++i;
  }

  const Eigen::RowVector3d centroid = shape.points.colwise().mean();
  shape.points.rowwise() -= centroid;
  const Vec3 ext = (shape.points.colwise().maxCoeff() - shape.points.colwise().minCoeff()).transpose();
  const double scale = std::min(1.0 / ext.norm(), 0.5 / shape.points.cwiseAbs().maxCoeff());
  shape.points *= scale;
  shape.points.rowwise() -= shape.points.colwise().mean();
  shape.extent = (shape.points.colwise().maxCoeff() - shape.points.colwise().minCoeff()).transpose();

  shape.colors.resize(k_points, 3);
  const Vec3 hue = detail::part_hue(category);
  for (int i = 0; i < k_points; ++i) {
    Vec3 c = (Vec3::Constant(0.5) + shape.points.row(i).transpose()).cwiseMax(0.0).cwiseMin(1.0);
    if (shape.part[i] == 1) c = 0.5 * c + 0.5 * hue;
    shape.colors.row(i) = c.transpose();
  }
  return shape;
}

struct ObjectPose {
  Rotation r;
  Vec3 t = Vec3::Zero();  // meters
  Vec3 s = Vec3::Ones();  // bounding-box size, meters
};

struct Observation {
  Points points;  // camera frame, meters
  Colors colors;
  ObjectPose gt;
  ShapeCategory category = ShapeCategory::kBox;
  int instance = 0;
  std::uint64_t seed = 0;
  int visible_count = 0;          // surface samples surviving occlusion
  std::vector<int> source_index;  // canonical sample behind each row
};

struct RenderOptions {
  int n_points = 2048;
  double noise_sigma = 0.0;       // meters, along the viewing ray
  int depth_bins = 64;            // per angular axis
  double depth_tolerance = 0.02;  // relative to the object diagonal
  int min_visible = 32;
};

// Per-axis scale taking canonical coordinates to object-frame meters.
inline Vec3 canonical_scale(const ShapeModel& shape, const Vec3& s) {
  return s.cwiseQuotient(shape.extent);
}

// Places the instance at `pose`, keeps the surface seen from a sensor along
// `viewpoint` (unit vector from the object towards the sensor, camera frame)
// and resamples to a fixed point count.
inline Observation render_observation(const ShapeModel& shape, const ObjectPose& pose,
                                      const Vec3& viewpoint, std::uint64_t seed,
                                      const RenderOptions& opt = {}) {
  if (!(pose.s.minCoeff() > 0.0)) throw InvalidArgument("object size must be positive");
  if (std::abs(viewpoint.norm() - 1.0) > 1e-9) throw InvalidArgument("viewpoint must be a unit vector");
  const Eigen::Index k = shape.points.rows();
  const Vec3 scale = canonical_scale(shape, pose.s);
  const double diag = pose.s.norm();
  const Vec3 sensor = pose.t + viewpoint * std::max(pose.t.norm(), 2.0 * diag);
  const Mat3& rm = pose.r.matrix();

  Points cam(k, 3);
  std::vector<int> front;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Vec3 q = rm * shape.points.row(i).transpose().cwiseProduct(scale) + pose.t;
    const Vec3 n = rm * shape.normals.row(i).transpose().cwiseQuotient(scale).normalized();
    cam.row(i) = q.transpose();
    if (n.dot(sensor - q) > 0.0) front.push_back(static_cast<int>(i));
  }

  // Angular depth buffer around the optical axis.
  const Vec3 axis = -viewpoint;
  Vec3 u = axis.unitOrthogonal();
  const Vec3 w = axis.cross(u);
  std::vector<std::array<double, 3>> ray(front.size());  // angle1, angle2, range
  double max_angle = 0.0;
  for (std::size_t j = 0; j < front.size(); ++j) {
    const Vec3 d = cam.row(front[j]).transpose() - sensor;
    const double depth = d.dot(axis);
    ray[j] = {std::atan2(d.dot(u), depth), std::atan2(d.dot(w), depth), d.norm()};
    max_angle = std::max({max_angle, std::abs(ray[j][0]), std::abs(ray[j][1])});
  }
  const int bins = opt.depth_bins;
  const double span = 2.0 * max_angle * (1.0 + 1e-9) + 1e-300;
  auto bin_of = [&](const std::array<double, 3>& a) {
    const int b1 = std::clamp(static_cast<int>((a[0] + 0.5 * span) / span * bins), 0, bins - 1);
    const int b2 = std::clamp(static_cast<int>((a[1] + 0.5 * span) / span * bins), 0, bins - 1);
    return b1 * bins + b2;
  };
  std::vector<double> nearest(static_cast<std::size_t>(bins) * bins,
                              std::numeric_limits<double>::infinity());
  for (const auto& a : ray) {
    double& z = nearest[bin_of(a)];
    z = std::min(z, a[2]);
  }
  std::vector<int> visible;
  const double tol = opt.depth_tolerance * diag;
  for (std::size_t j = 0; j < front.size(); ++j) {
    if (ray[j][2] <= nearest[bin_of(ray[j])] + tol) visible.push_back(front[j]);
  }
  if (static_cast<int>(visible.size()) < opt.min_visible) {
    throw DegenerateView("only " + std::to_string(visible.size()) + " points visible");
  }

  Rng rng(seed);
  std::vector<int> chosen;
  if (static_cast<int>(visible.size()) >= opt.n_points) {
    std::vector<int> pool = visible;
    for (int i = 0; i < opt.n_points; ++i) {
      const auto j = i + static_cast<int>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    chosen.assign(pool.begin(), pool.begin() + opt.n_points);
  } else {
    chosen = visible;
    while (static_cast<int>(chosen.size()) < opt.n_points) {
      chosen.push_back(visible[rng.below(visible.size())]);
    }
  }

  Observation obs;
  obs.gt = pose;
  obs.category = shape.category;
  obs.seed = seed;
  obs.visible_count = static_cast<int>(visible.size());
  obs.source_index = chosen;
  obs.points.resize(opt.n_points, 3);
  obs.colors.resize(opt.n_points, 3);
  for (int i = 0; i < opt.n_points; ++i) {
    Vec3 q = cam.row(chosen[i]).transpose();
    if (opt.noise_sigma > 0.0) q += opt.noise_sigma * rng.normal() * (q - sensor).normalized();
    obs.points.row(i) = q.transpose();
    obs.colors.row(i) = shape.colors.row(chosen[i]);
  }
  return obs;
}

struct TranslationSize {
  Vec3 t;
  Vec3 s;
};

// Centroid and inflated axis-aligned extent of a (partial) cloud.
inline TranslationSize estimate_translation_size(const Points& points, double inflation = 1.25) {
  if (points.rows() < 32) throw InvalidArgument("translation/size estimate needs at least 32 points");
  TranslationSize out;
  out.t = points.colwise().mean().transpose();
  const Points centered = points.rowwise() - out.t.transpose();
  out.s = inflation * (centered.colwise().maxCoeff() - centered.colwise().minCoeff()).transpose();
  return out;
}

// P = (P_obs - t) / ||s||.
inline Points normalize_points(const Points& points, const Vec3& t, const Vec3& s) {
  const double n = s.norm();
  if (!(n > 0.0)) throw InvalidArgument("cannot normalize by a zero size");
  return (points.rowwise() - t.transpose()) / n;
}

struct AugmentRanges {
  double translation = 0.02;  // per-axis U(-a, a), meters
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  double rotation_deg = 20.0;  // per-axis U(0, a)
};

// Random rigid + scale perturbation about the object center. The ground-truth
// pose is updated so that points = R' (x * k') + t' still holds.
inline Observation augment(const Observation& obs, std::uint64_t seed, const AugmentRanges& ranges = {}) {
  Rng rng(seed);
  Vec3 dt;
  for (int i = 0; i < 3; ++i) dt[i] = rng.uniform(-ranges.translation, ranges.translation);
  const double ds = rng.uniform(ranges.scale_lo, ranges.scale_hi);
  const double ax = deg2rad(rng.uniform(0.0, ranges.rotation_deg));
  const double ay = deg2rad(rng.uniform(0.0, ranges.rotation_deg));
  const double az = deg2rad(rng.uniform(0.0, ranges.rotation_deg));
  const Rotation dr = rot_z(az) * rot_y(ay) * rot_x(ax);

  Observation out = obs;
  out.points = (ds * ((obs.points.rowwise() - obs.gt.t.transpose()) * dr.matrix().transpose()))
                   .rowwise() + (obs.gt.t + dt).transpose();
  out.gt.r = dr * obs.gt.r;
  out.gt.t = obs.gt.t + dt;
  out.gt.s = ds * obs.gt.s;
  return out;
}

}  // namespace sphcorr

#endif  // SPHCORR_SCENE_HPP_
