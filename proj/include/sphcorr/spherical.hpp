#ifndef SPHCORR_SPHERICAL_HPP_
#define SPHCORR_SPHERICAL_HPP_

// Spherical representation of an observation: per-anchor features obtained by
// projecting normalized points onto a sphere grid, and the matching
// ground-truth spherical NOCS targets.

#include <vector>

#include "sphcorr/errors.hpp"
#include "sphcorr/features.hpp"
#include "sphcorr/so3.hpp"
#include "sphcorr/sphere_grid.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

struct SphericalFeatureMap {
  Matrix features;                // M x C; unassigned rows are zero
  std::vector<bool> assigned;     // M
  std::vector<int> source_index;  // M; -1 where unassigned

  Eigen::Index cells() const { return features.rows(); }
  int assigned_count() const {
    int n = 0;
    for (bool b : assigned) n += b;
    return n;
  }
  Vector assigned_weights() const {
    Vector w(assigned.size());
    for (std::size_t i = 0; i < assigned.size(); ++i) w[i] = assigned[i] ? 1.0 : 0.0;
    return w;
  }
};

// For every cell keep the feature row of the point with the largest radius
// among the points falling in it (ties: lowest point index). Points at the
// origin have no direction and are skipped.
inline SphericalFeatureMap project_to_sphere(const SphericalGrid& grid, const Points& p,
                                             const Matrix& point_features) {
  if (p.rows() == 0) throw InvalidArgument("cannot project an empty point cloud");
  if (point_features.rows() != p.rows()) throw InvalidArgument("features are not row-aligned with points");
  const Eigen::Index m = grid.size();
  SphericalFeatureMap out;
  out.features.setZero(m, point_features.cols());
  out.assigned.assign(m, false);
  out.source_index.assign(m, -1);
  std::vector<double> best_radius(m, -1.0);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const Vec3 v = p.row(i).transpose();
    const double r = v.norm();
    if (!(r > 0.0)) continue;
    const Eigen::Index cell = grid.ang2pix(v);
    if (r > best_radius[cell]) {
      best_radius[cell] = r;
      out.source_index[cell] = static_cast<int>(i);
    }
  }
  for (Eigen::Index c = 0; c < m; ++c) {
    if (out.source_index[c] < 0) continue;
    out.assigned[c] = true;
    out.features.row(c) = point_features.row(out.source_index[c]);
  }
  return out;
}

inline SphericalFeatureMap project_to_sphere(const SphericalGrid& grid, const Points& p,
                                             const PointFeatures& f) {
  return project_to_sphere(grid, p, f.values);
}

// O_gt_m = R^T A_m.
inline Points gt_spherical_nocs(const Rotation& r, const SphericalGrid& grid) {
  return grid.anchors() * r.matrix();
}

}  // namespace sphcorr

#endif  // SPHCORR_SPHERICAL_HPP_
