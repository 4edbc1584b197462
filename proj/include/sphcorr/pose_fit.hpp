#ifndef SPHCORR_POSE_FIT_HPP_
#define SPHCORR_POSE_FIT_HPP_

// Rotation from anchor / NOCS correspondences: rotation-only Procrustes,
// full Umeyama similarity, and a RANSAC wrapper with angular residuals.
//
// Convention: correspondences satisfy O = R^T A, i.e. `src` holds anchors in
// the camera frame and `dst` their object-frame (NOCS) directions. The solvers
// return that R.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "sphcorr/errors.hpp"
#include "sphcorr/rng.hpp"
#include "sphcorr/so3.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

struct CorrespondenceSet {
  Points src;      // anchors A_m
  Points dst;      // NOCS directions O_m
  Vector weights;  // empty means every pair active with weight 1

  Eigen::Index size() const { return src.rows(); }
  double weight(Eigen::Index i) const { return weights.size() == 0 ? 1.0 : weights[i]; }

  void validate(double tol = 1e-6) const {
    if (src.rows() != dst.rows()) throw InvalidArgument("src and dst differ in length");
    if (weights.size() != 0 && weights.size() != src.rows()) {
      throw InvalidArgument("weights differ in length from correspondences");
    }
    for (Eigen::Index i = 0; i < src.rows(); ++i) {
      if (weight(i) <= 0.0) continue;
      if (std::abs(src.row(i).norm() - 1.0) > tol || std::abs(dst.row(i).norm() - 1.0) > tol) {
        throw InvalidArgument("correspondence rows must be unit vectors");
      }
    }
  }
};

namespace detail {

// Proper rotation maximizing tr(R^T H).
inline Mat3 nearest_rotation_to(const Mat3& h) {
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
    throw DegenerateGeometry("cross-covariance has rank < 2");
  }
  const Mat3 u = svd.matrixU(), v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  return u * d.asDiagonal() * v.transpose();
}

}  // namespace detail

// argmin_R sum_m w_m ||O_m - R^T A_m||^2 via the SVD of H = sum_m w_m A_m O_m^T.
inline Rotation procrustes_rotation(const CorrespondenceSet& corr) {
  corr.validate();
  Mat3 h = Mat3::Zero();
  int active = 0;
  for (Eigen::Index i = 0; i < corr.size(); ++i) {
    const double w = corr.weight(i);
    if (w <= 0.0) continue;
    ++active;
    h += w * corr.src.row(i).transpose() * corr.dst.row(i);
  }
  if (active < 3) throw DegenerateGeometry("procrustes needs at least 3 active correspondences");
  return Rotation::from_matrix(detail::nearest_rotation_to(h));
}

struct Similarity {
  Rotation r;
  Vec3 t = Vec3::Zero();
  double scale = 1.0;
};

// Least-squares dst ~ scale * R * src + t (Umeyama), reflections excluded.
inline Similarity umeyama_similarity(const Points& src, const Points& dst) {
  if (src.rows() != dst.rows()) throw InvalidArgument("src and dst differ in length");
  const Eigen::Index n = src.rows();
  if (n < 3) throw DegenerateGeometry("umeyama needs at least 3 points");
  const Eigen::RowVector3d mu_s = src.colwise().mean(), mu_d = dst.colwise().mean();
  const Points cs = src.rowwise() - mu_s, cd = dst.rowwise() - mu_d;
  const double var_s = cs.squaredNorm() / static_cast<double>(n);
  if (!(var_s > 0.0)) throw DegenerateGeometry("source points coincide");
  const Mat3 sigma = cd.transpose() * cs / static_cast<double>(n);
  const Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) throw DegenerateGeometry("degenerate point configuration");
  const Mat3 u = svd.matrixU(), v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, u.determinant() * v.determinant() < 0.0 ? -1.0 : 1.0);
  Similarity out;
  out.r = Rotation::from_matrix(u * d.asDiagonal() * v.transpose());
  out.scale = sv.dot(d) / var_s;
  out.t = mu_d.transpose() - out.scale * (out.r.matrix() * mu_s.transpose());
  return out;
}

struct RansacConfig {
  int iterations = 256;
  int sample_size = 3;
  double inlier_threshold = 0.0872664625997164788;  // 5 degrees
  std::uint64_t seed = 0;
  double min_inlier_ratio = 0.2;  // below this the result is flagged
};

struct RansacResult {
  Rotation r;
  std::vector<bool> inliers;
  double inlier_ratio = 0.0;
  int best_iteration = -1;
  bool low_support = false;  // inlier_ratio < min_inlier_ratio
};

// Angle between O_m and R^T A_m for every pair.
inline Vector angular_residuals(const CorrespondenceSet& corr, const Rotation& r) {
  const Points pred = corr.src * r.matrix();  // rows (R^T a)^T
  Vector out(corr.size());
  for (Eigen::Index i = 0; i < corr.size(); ++i) {
    out[i] = vector_angle(pred.row(i).transpose(), corr.dst.row(i).transpose());
  }
  return out;
}

// Minimal-sample hypotheses scored by angular inlier count; the best one is
// refit on its inliers. Ties keep the earliest iteration. Throws
// RobustFitFailure when no hypothesis gathers sample_size inliers.
inline RansacResult ransac_rotation(const CorrespondenceSet& corr, const RansacConfig& cfg) {
  corr.validate();
  if (cfg.sample_size < 2) throw InvalidArgument("RANSAC sample size must be >= 2");
  if (!(cfg.inlier_threshold > 0.0 && cfg.inlier_threshold < std::numbers::pi)) {
    throw InvalidArgument("RANSAC threshold must lie in (0, pi)");
  }
  std::vector<int> active;
  for (Eigen::Index i = 0; i < corr.size(); ++i) {
    if (corr.weight(i) > 0.0) active.push_back(static_cast<int>(i));
  }
  const int n = static_cast<int>(active.size());
  if (n < cfg.sample_size) throw RobustFitFailure("fewer active correspondences than the sample size");

  const double cos_thr = std::cos(cfg.inlier_threshold);
  auto count_inliers = [&](const Mat3& r, std::vector<bool>* mask) {
    int count = 0;
    if (mask) mask->assign(corr.size(), false);
    for (int i : active) {
      const Eigen::RowVector3d pred = corr.src.row(i) * r;
      if (pred.dot(corr.dst.row(i)) > cos_thr * corr.dst.row(i).norm() * pred.norm()) {
        ++count;
        if (mask) (*mask)[i] = true;
      }
    }
    return count;
  };

  Rng rng(cfg.seed);
  std::vector<int> pool = active;
  int best_count = -1, best_iter = -1;
  Mat3 best_r = Mat3::Identity();
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int j = 0; j < cfg.sample_size; ++j) {
      const int k = j + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - j)));
      std::swap(pool[j], pool[k]);
    }
    Mat3 h = Mat3::Zero();
    for (int j = 0; j < cfg.sample_size; ++j) {
      h += corr.src.row(pool[j]).transpose() * corr.dst.row(pool[j]);
    }
    Mat3 r;
    try {
      r = detail::nearest_rotation_to(h);
    } catch (const DegenerateGeometry&) {
      continue;
    }
    const int c = count_inliers(r, nullptr);
    if (c > best_count) {
      best_count = c;
      best_iter = it;
      best_r = r;
    }
  }
  if (best_count < cfg.sample_size) {
    throw RobustFitFailure("no RANSAC hypothesis reached " + std::to_string(cfg.sample_size) +
                           " inliers (best " + std::to_string(std::max(best_count, 0)) + ")");
  }

  std::vector<bool> mask;
  count_inliers(best_r, &mask);
  CorrespondenceSet refit{corr.src, corr.dst, Vector::Zero(corr.size())};
  for (Eigen::Index i = 0; i < corr.size(); ++i) {
    if (mask[i]) refit.weights[i] = corr.weight(i);
  }
  RansacResult out;
  try {
    out.r = procrustes_rotation(refit);
  } catch (const DegenerateGeometry&) {
    out.r = Rotation::from_matrix(best_r);
  }
  const int final_count = count_inliers(out.r.matrix(), &out.inliers);
  out.inlier_ratio = static_cast<double>(final_count) / static_cast<double>(n);
  out.best_iteration = best_iter;
  out.low_support = out.inlier_ratio < cfg.min_inlier_ratio;
  return out;
}

}  // namespace sphcorr

#endif  // SPHCORR_POSE_FIT_HPP_
