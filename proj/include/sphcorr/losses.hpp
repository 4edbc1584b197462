#ifndef SPHCORR_LOSSES_HPP_
#define SPHCORR_LOSSES_HPP_

// Correspondence errors and losses on spherical NOCS maps, with closed-form
// gradients with respect to the prediction.

#include <cmath>
#include <string>
#include <string_view>

#include "sphcorr/errors.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

enum class ErrorNorm { kL1, kL2 };
enum class LossKind { kL1, kSmoothL1, kHypL1, kL2, kHypL2 };

inline constexpr LossKind kAllLossKinds[] = {LossKind::kL1, LossKind::kSmoothL1, LossKind::kHypL1,
                                             LossKind::kL2, LossKind::kHypL2};

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::kL1: return "l1";
    case LossKind::kSmoothL1: return "smooth_l1";
    case LossKind::kHypL1: return "hyp_l1";
    case LossKind::kL2: return "l2";
    case LossKind::kHypL2: return "hyp_l2";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  for (LossKind k : kAllLossKinds) {
    if (to_string(k) == s) return k;
  }
  throw InvalidArgument("unknown loss kind '" + std::string(s) + "'");
}

inline ErrorNorm error_norm_of(LossKind k) {
  return (k == LossKind::kL2 || k == LossKind::kHypL2) ? ErrorNorm::kL2 : ErrorNorm::kL1;
}

// arcosh(1 + x) = log(1 + x + sqrt(x^2 + 2x)), evaluated through log1p so
// that small x keeps full relative precision.
inline double arcosh1p(double x) { return std::log1p(x + std::sqrt(x * (x + 2.0))); }

// Per-anchor loss as a function of the scalar error e >= 0.
inline double loss_of_error(LossKind k, double e) {
  switch (k) {
    case LossKind::kL1:
    case LossKind::kL2:
      return e;
    case LossKind::kSmoothL1:
      return e <= 0.1 ? 5.0 * e * e : e - 0.05;
    case LossKind::kHypL1:
    case LossKind::kHypL2:
      return arcosh1p(e);
  }
  return 0.0;
}

// d loss / d e. Defined as 0 at e = 0 for every kind.
inline double loss_slope(LossKind k, double e) {
  if (e <= 0.0) return 0.0;
  switch (k) {
    case LossKind::kL1:
    case LossKind::kL2:
      return 1.0;
    case LossKind::kSmoothL1:
      return e <= 0.1 ? 10.0 * e : 1.0;
    case LossKind::kHypL1:
    case LossKind::kHypL2:
      return 1.0 / std::sqrt(e * (e + 2.0));
  }
  return 0.0;
}

inline void check_same_shape(const Points& a, const Points& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("correspondence maps differ in row count");
}

// e_m = ||O_m - O_gt_m|| under the chosen norm.
inline Vector corr_error(const Points& o, const Points& o_gt, ErrorNorm norm) {
  check_same_shape(o, o_gt);
  const Points d = o - o_gt;
  return norm == ErrorNorm::kL1 ? Vector(d.cwiseAbs().rowwise().sum()) : Vector(d.rowwise().norm());
}

struct LossReport {
  double value = 0.0;
  Vector per_anchor;
  Points grad_wrt_o;  // d value / d O
};

// Mean per-anchor loss. With a non-empty `weights` (one entry per anchor) the
// mean is weighted instead, e.g. to restrict supervision to assigned anchors.
inline LossReport corr_loss(const Points& o, const Points& o_gt, LossKind kind,
                            const Vector& weights = Vector()) {
  check_same_shape(o, o_gt);
  const Eigen::Index m = o.rows();
  if (m == 0) throw InvalidArgument("empty correspondence map");
  Vector w = weights.size() == 0 ? Vector::Ones(m) : weights;
  if (w.size() != m) throw InvalidArgument("loss weights do not match anchor count");
  const double wsum = w.sum();
  if (!(wsum > 0.0)) throw InvalidArgument("loss weights sum to zero");

  const ErrorNorm norm = error_norm_of(kind);
  const Points d = o - o_gt;
  const Vector e = corr_error(o, o_gt, norm);
  LossReport r;
  r.per_anchor.resize(m);
  r.grad_wrt_o.setZero(m, 3);
  for (Eigen::Index i = 0; i < m; ++i) {
    r.per_anchor[i] = loss_of_error(kind, e[i]);
    const double slope = loss_slope(kind, e[i]) * w[i] / wsum;
    if (slope == 0.0) continue;
    if (norm == ErrorNorm::kL1) {
      for (int c = 0; c < 3; ++c) {
        const double v = d(i, c);
        r.grad_wrt_o(i, c) = slope * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
      }
    } else {
      r.grad_wrt_o.row(i) = slope * d.row(i) / e[i];
    }
  }
  r.value = w.dot(r.per_anchor) / wsum;
  return r;
}

// Translation/size regression loss ||t - t_gt||_1 + ||s - s_gt||_1.
inline double ts_loss(const Vec3& t, const Vec3& s, const Vec3& t_gt, const Vec3& s_gt) {
  return (t - t_gt).cwiseAbs().sum() + (s - s_gt).cwiseAbs().sum();
}

}  // namespace sphcorr

#endif  // SPHCORR_LOSSES_HPP_
