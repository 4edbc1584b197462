#ifndef SPHCORR_SO3_HPP_
#define SPHCORR_SO3_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Geometry>

#include "sphcorr/errors.hpp"
#include "sphcorr/rng.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

// A proper rotation: orthonormal 3x3 matrix with determinant +1.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  // Validates orthonormality and orientation to `tol` per entry.
  static Rotation from_matrix(const Mat3& m, double tol = 1e-9) {
    if (!m.allFinite()) throw InvalidArgument("rotation has non-finite entries");
    const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > tol) {
      throw InvalidArgument("matrix is not orthonormal (max deviation " +
                            std::to_string(ortho) + ")");
    }
    if (std::abs(m.determinant() - 1.0) > tol) {
      throw InvalidArgument("matrix determinant is not +1");
    }
    Rotation r;
    r.m_ = m;
    return r;
  }

  // Row-major 9-tuple, the serialized form used in datasets and reports.
  static Rotation from_row_major(const std::array<double, 9>& v, double tol = 1e-9) {
    Mat3 m;
    m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
    return from_matrix(m, tol);
  }

  std::array<double, 9> row_major() const {
    return {m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0), m_(1, 1),
            m_(1, 2), m_(2, 0), m_(2, 1), m_(2, 2)};
  }

  const Mat3& matrix() const { return m_; }
  Rotation inverse() const {
    Rotation r;
    r.m_ = m_.transpose();
    return r;
  }

  Rotation operator*(const Rotation& other) const {
    Rotation r;
    r.m_ = m_ * other.m_;
    return r;
  }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

 private:
  Mat3 m_;
};

struct UnitQuaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static UnitQuaternion normalized(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw InvalidArgument("cannot normalize a zero quaternion");
    }
    return {w / n, x / n, y / n, z / n};
  }

  static UnitQuaternion from_rotation(const Rotation& r) {
    const Eigen::Quaterniond q(r.matrix());
    return normalized(q.w(), q.x(), q.y(), q.z());
  }

  Rotation to_rotation() const {
    const Eigen::Quaterniond q(w, x, y, z);
    Mat3 m = q.toRotationMatrix();
    return Rotation::from_matrix(m);
  }
};

// Haar-uniform rotation: a 4D isotropic Gaussian, normalized, is uniform on
// S^3, and the double cover S^3 -> SO(3) pushes that forward to Haar measure.
inline Rotation random_rotation(Rng& rng) {
  for (;;) {
    const double w = rng.normal(), x = rng.normal(), y = rng.normal(), z = rng.normal();
    if (w * w + x * x + y * y + z * z > 1e-12) {
      return UnitQuaternion::normalized(w, x, y, z).to_rotation();
    }
  }
}

// Rotation angle of a^T b, i.e. arccos((tr(a^T b) - 1) / 2). Evaluated as
// atan2(sin, cos) with sin taken from the skew part, which keeps full relative
// precision near 0 where arccos of a value close to 1 bottoms out near 1e-8.
inline double geodesic_angle(const Rotation& a, const Rotation& b) {
  const Mat3 m = a.matrix().transpose() * b.matrix();
  const double c = std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 w(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return std::atan2(0.5 * w.norm(), c);
}

// Angle between two nonzero vectors, atan2(|a x b|, a . b).
inline double vector_angle(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

// Rodrigues rotation about a unit axis.
inline Rotation axis_angle(const Vec3& axis, double angle) {
  if (!axis.allFinite() || std::abs(axis.norm() - 1.0) > 1e-9) {
    throw InvalidArgument("rotation axis must have unit norm");
  }
  Mat3 k;
  k << 0.0, -axis.z(), axis.y(), axis.z(), 0.0, -axis.x(), -axis.y(), axis.x(), 0.0;
  const Mat3 m = Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
  return Rotation::from_matrix(m);
}

// Inverse of axis_angle. Angle in [0, pi]; the axis is +z for the identity.
inline std::pair<Vec3, double> to_axis_angle(const Rotation& r) {
  const Eigen::AngleAxisd aa(r.matrix());
  if (aa.angle() == 0.0) return {Vec3::UnitZ(), 0.0};
  return {aa.axis().normalized(), aa.angle()};
}

inline Points apply(const Rotation& r, const Points& points) {
  return points * r.matrix().transpose();
}

inline Rotation rot_x(double a) { return axis_angle(Vec3::UnitX(), a); }
inline Rotation rot_y(double a) { return axis_angle(Vec3::UnitY(), a); }
inline Rotation rot_z(double a) { return axis_angle(Vec3::UnitZ(), a); }

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace sphcorr

#endif  // SPHCORR_SO3_HPP_
