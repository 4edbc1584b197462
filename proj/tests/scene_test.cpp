#include "sphcorr/scene.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "sphcorr/rng.hpp"
#include "sphcorr/so3.hpp"

namespace sphcorr {
namespace {

double Chamfer(const Points& a, const Points& b) {
  auto one_way = [](const Points& p, const Points& q) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < q.rows(); ++j) best = std::min(best, (p.row(i) - q.row(j)).squaredNorm());
      s += best;
    }
    return s / static_cast<double>(p.rows());
  };
  return one_way(a, b) + one_way(b, a);
}

ObjectPose Pose(const Rotation& r, const Vec3& t, const Vec3& s) {
  ObjectPose p;
  p.r = r;
  p.t = t;
  p.s = s;
  return p;
}

TEST(MakeShape, BoxPointsLieOnTheBoxSurface) {
  const ShapeModel m = make_shape(ShapeCategory::kBox, {0.4, 0.3, 0.2}, 4000, 1);
  EXPECT_LT(m.points.colwise().mean().norm(), 1e-9);
  // Relative extents are preserved by the uniform normalization.
  EXPECT_NEAR(m.extent.y() / m.extent.x(), 0.75, 0.02);
  EXPECT_NEAR(m.extent.z() / m.extent.x(), 0.5, 0.02);
  const Vec3 lo = m.points.colwise().minCoeff().transpose(), hi = m.points.colwise().maxCoeff().transpose();
  const Vec3 center = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (Eigen::Index i = 0; i < m.points.rows(); ++i) {
    const Vec3 u = (m.points.row(i).transpose() - center).cwiseQuotient(half);
    EXPECT_LE(u.cwiseAbs().maxCoeff(), 1.0 + 1e-9);
    EXPECT_NEAR(u.cwiseAbs().maxCoeff(), 1.0, 1e-9);  // on a face, not inside
  }
}

TEST(MakeShape, CanonicalInvariants) {
  Rng rng(5);
  for (ShapeCategory c : {ShapeCategory::kBottle, ShapeCategory::kMug, ShapeCategory::kBox}) {
    for (int i = 0; i < 5; ++i) {
      const ShapeModel m = make_shape(c, random_shape_params(c, rng), 3000, 10 + i);
      EXPECT_LT(m.points.colwise().mean().norm(), 1e-9);
      EXPECT_LE(m.points.cwiseAbs().maxCoeff(), 0.5 + 1e-12);
      EXPECT_LE(m.extent.norm(), 1.0 + 1e-12);
      EXPECT_GE(m.colors.minCoeff(), 0.0);
      EXPECT_LE(m.colors.maxCoeff(), 1.0);
      EXPECT_LT((m.normals.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-9);
    }
  }
}

TEST(MakeShape, DiagonalIsOneWhenTheCubeAllowsIt) {
  const ShapeModel m = make_shape(ShapeCategory::kBox, {1.0, 1.0, 1.0}, 3000, 2);
  EXPECT_NEAR(m.extent.norm(), 1.0, 1e-3);
}

TEST(MakeShape, HandleParametersChangeTheShape) {
  const ShapeModel a = make_shape(ShapeCategory::kMug, {1.0, 0.25, 0.04}, 800, 3);
  const ShapeModel b = make_shape(ShapeCategory::kMug, {1.0, 0.45, 0.1}, 800, 3);
  EXPECT_GT(Chamfer(a.points, b.points), 1e-4);
}

TEST(MakeShape, DeterministicForSeed) {
  const ShapeModel a = make_shape(ShapeCategory::kBottle, {2.0, 0.4, 0.3}, 1000, 77);
  const ShapeModel b = make_shape(ShapeCategory::kBottle, {2.0, 0.4, 0.3}, 1000, 77);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.colors, b.colors);
}

TEST(MakeShape, RejectsOutOfRangeParameters) {
  EXPECT_THROW(make_shape(ShapeCategory::kBottle, {5.0, 0.4, 0.3}, 100, 1), InvalidArgument);
  EXPECT_THROW(make_shape(ShapeCategory::kMug, {1.0, 0.3}, 100, 1), InvalidArgument);
  EXPECT_THROW(make_shape(ShapeCategory::kBox, {0.0, 0.5, 0.5}, 100, 1), InvalidArgument);
}

TEST(RenderObservation, SphereShowsAboutHalf) {
  const ShapeModel m = make_shape(ShapeCategory::kSphere, {1.0}, 8000, 4);
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const Vec3 view = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Observation o = render_observation(m, Pose(random_rotation(rng), Vec3(0, 0, 0.8), Vec3::Constant(0.2)), view, t);
    const double frac = static_cast<double>(o.visible_count) / 8000.0;
    EXPECT_GE(frac, 0.35);
    EXPECT_LE(frac, 0.65);
    EXPECT_EQ(o.points.rows(), 2048);
  }
}

TEST(RenderObservation, NoiselessIdentityPoseReproducesScaledPoints) {
  const ShapeModel m = make_shape(ShapeCategory::kMug, {1.0, 0.3, 0.06}, 6000, 8);
  const Vec3 t(0.05, -0.02, 0.7), s = m.extent * 0.25;
  const Observation o = render_observation(m, Pose(Rotation(), t, s), -t.normalized(), 3);
  const Vec3 k = canonical_scale(m, s);
  for (Eigen::Index i = 0; i < o.points.rows(); ++i) {
    const Vec3 expect = m.points.row(o.source_index[i]).transpose().cwiseProduct(k) + t;
    EXPECT_EQ(o.points.row(i).transpose(), expect);
    EXPECT_EQ(o.colors.row(i), m.colors.row(o.source_index[i]));
  }
}

TEST(RenderObservation, InvertingThePoseRecoversCanonicalPoints) {
  const ShapeModel m = make_shape(ShapeCategory::kBottle, {2.5, 0.4, 0.3}, 6000, 9);
  Rng rng(10);
  const double sigma = 0.002;
  RenderOptions opt;
  opt.noise_sigma = sigma;
  const ObjectPose pose = Pose(random_rotation(rng), Vec3(0.0, 0.05, 0.8), m.extent * 0.3);
  const Observation o = render_observation(m, pose, -pose.t.normalized(), 4, opt);
  const Vec3 k = canonical_scale(m, pose.s);
  for (Eigen::Index i = 0; i < o.points.rows(); ++i) {
    const Vec3 q = pose.r.matrix().transpose() * (o.points.row(i).transpose() - pose.t);
    const Vec3 x = m.points.row(o.source_index[i]).transpose();
    EXPECT_LT((q - x.cwiseProduct(k)).norm(), 6.0 * sigma);
  }
}

TEST(RenderObservation, DeterministicAndSeedSensitive) {
  const ShapeModel m = make_shape(ShapeCategory::kBox, {0.5, 0.7, 0.3}, 4000, 11);
  const ObjectPose pose = Pose(rot_x(0.4), Vec3(0, 0, 0.9), m.extent * 0.2);
  RenderOptions opt;
  opt.noise_sigma = 0.002;
  const Observation a = render_observation(m, pose, -Vec3::UnitZ(), 5, opt);
  const Observation b = render_observation(m, pose, -Vec3::UnitZ(), 5, opt);
  const Observation c = render_observation(m, pose, -Vec3::UnitZ(), 6, opt);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
}

TEST(RenderObservation, OccludedSurfaceIsDropped) {
  // Viewed along -z, a box face pointing away from the sensor is culled.
  const ShapeModel m = make_shape(ShapeCategory::kBox, {0.6, 0.6, 0.6}, 6000, 12);
  const ObjectPose pose = Pose(Rotation(), Vec3(0, 0, 1.0), m.extent * 0.2);
  const Observation o = render_observation(m, pose, -Vec3::UnitZ(), 7);
  const double far_z = pose.t.z() + 0.5 * pose.s.z();
  for (Eigen::Index i = 0; i < o.points.rows(); ++i) EXPECT_LT(o.points(i, 2), far_z - 1e-9);
}

TEST(RenderObservation, TooFewVisiblePointsIsADegenerateView) {
  const ShapeModel m = make_shape(ShapeCategory::kSphere, {1.0}, 40, 13);
  EXPECT_THROW(render_observation(m, Pose(Rotation(), Vec3(0, 0, 1), Vec3::Constant(0.2)), -Vec3::UnitZ(), 1),
               DegenerateView);
}

TEST(RenderObservation, RejectsBadInputs) {
  const ShapeModel m = make_shape(ShapeCategory::kSphere, {1.0}, 1000, 14);
  EXPECT_THROW(render_observation(m, Pose(Rotation(), Vec3(0, 0, 1), Vec3(0.1, 0.0, 0.1)), -Vec3::UnitZ(), 1),
               InvalidArgument);
  EXPECT_THROW(render_observation(m, Pose(Rotation(), Vec3(0, 0, 1), Vec3::Constant(0.1)), Vec3(0, 0, -2), 1),
               InvalidArgument);
}

TEST(EstimateTranslationSize, CompleteBoxExtent) {
  const ShapeModel m = make_shape(ShapeCategory::kBox, {0.8, 0.5, 0.3}, 20000, 15);
  const Vec3 e = m.extent * 0.4;
  const Points cloud = m.points * canonical_scale(m, e).asDiagonal();
  const TranslationSize ts = estimate_translation_size(cloud, 1.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(ts.s[i], e[i], 0.02 * e[i]);
}

TEST(EstimateTranslationSize, TranslationEquivariant) {
  Rng rng(16);
  Points p(100, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
  const Vec3 d(0.3, -1.2, 2.0);
  const TranslationSize a = estimate_translation_size(p);
  const TranslationSize b = estimate_translation_size(p.rowwise() + d.transpose());
  EXPECT_LT((b.t - a.t - d).norm(), 1e-12);
  EXPECT_LT((b.s - a.s).norm(), 1e-12);
}

TEST(EstimateTranslationSize, RejectsTinyClouds) {
  EXPECT_THROW(estimate_translation_size(Points(0, 3)), InvalidArgument);
  EXPECT_THROW(estimate_translation_size(Points::Zero(31, 3)), InvalidArgument);
}

TEST(NormalizePoints, DefinitionAndHomogeneity) {
  Rng rng(17);
  Points p(64, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
  const Vec3 c = p.colwise().mean().transpose(), s(0.3, 0.2, 0.1);
  const Points n = normalize_points(p, c, s);
  EXPECT_LT(n.colwise().mean().norm(), 1e-12);
  EXPECT_EQ(n, (p.rowwise() - c.transpose()) / s.norm());
  EXPECT_LT((normalize_points(p, c, 2.0 * s) - 0.5 * n).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(normalize_points(p, c, Vec3::Zero()), InvalidArgument);
}

TEST(NormalizePoints, GroundTruthNormalizationStaysInsideTheCubeBound) {
  Rng rng(18);
  for (ShapeCategory cat : {ShapeCategory::kBottle, ShapeCategory::kMug, ShapeCategory::kBox}) {
    const ShapeModel m = make_shape(cat, random_shape_params(cat, rng), 5000, 19);
    const ObjectPose pose = Pose(random_rotation(rng), Vec3(0.02, 0.0, 0.8), m.extent * 0.3);
    const Observation o = render_observation(m, pose, -pose.t.normalized(), 2);
    const Points n = normalize_points(o.points, pose.t, pose.s);
    // Canonical points lie in [-0.5, 0.5]^3 and are scaled per axis by k.
    const double bound = 0.5 * std::sqrt(3.0) * canonical_scale(m, pose.s).maxCoeff() / pose.s.norm();
    EXPECT_LE(n.rowwise().norm().maxCoeff(), bound + 1e-12);
  }
}

TEST(Augment, ZeroRangesAreIdentity) {
  const ShapeModel m = make_shape(ShapeCategory::kMug, {1.2, 0.3, 0.05}, 4000, 20);
  const ObjectPose pose = Pose(rot_y(0.7), Vec3(0, 0, 0.8), m.extent * 0.25);
  const Observation o = render_observation(m, pose, -Vec3::UnitZ(), 3);
  AugmentRanges zero;
  zero.translation = 0.0;
  zero.scale_lo = zero.scale_hi = 1.0;
  zero.rotation_deg = 0.0;
  const Observation a = augment(o, 99, zero);
  EXPECT_LT((a.points - o.points).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(a.gt.r.matrix(), o.gt.r.matrix());
  EXPECT_EQ(a.gt.t, o.gt.t);
  EXPECT_EQ(a.gt.s, o.gt.s);
}

TEST(Augment, KeepsGroundTruthConsistent) {
  const ShapeModel m = make_shape(ShapeCategory::kBottle, {2.0, 0.35, 0.25}, 4000, 21);
  Rng rng(22);
  const ObjectPose pose = Pose(random_rotation(rng), Vec3(0.05, 0.0, 0.7), m.extent * 0.3);
  const Observation o = render_observation(m, pose, -pose.t.normalized(), 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Observation a = augment(o, seed);
    const Vec3 k = canonical_scale(m, a.gt.s);
    for (Eigen::Index i = 0; i < a.points.rows(); ++i) {
      const Vec3 expect = a.gt.r * Vec3(m.points.row(a.source_index[i]).transpose().cwiseProduct(k)) + a.gt.t;
      EXPECT_LT((a.points.row(i).transpose() - expect).norm(), 1e-9);
    }
    EXPECT_LE((a.gt.t - o.gt.t).cwiseAbs().maxCoeff(), 0.02);
    const double ds = a.gt.s.x() / o.gt.s.x();
    EXPECT_GE(ds, 0.8);
    EXPECT_LE(ds, 1.2);
  }
  const Observation x = augment(o, 5), y = augment(o, 5);
  EXPECT_EQ(x.points, y.points);
}

TEST(Category, ParseAndPrint) {
  for (ShapeCategory c : {ShapeCategory::kBottle, ShapeCategory::kMug, ShapeCategory::kBox, ShapeCategory::kSphere}) {
    EXPECT_EQ(parse_category(to_string(c)), c);
  }
  EXPECT_THROW(parse_category("can"), InvalidArgument);
}

}  // namespace
}  // namespace sphcorr
