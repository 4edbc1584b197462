#include "sphcorr/spherical.hpp"

#include <vector>

#include <gtest/gtest.h>

#include "sphcorr/rng.hpp"

namespace sphcorr {
namespace {

Points RandomPoints(Rng& rng, int n) {
  Points p(n, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
  return p;
}

Matrix RowIds(Eigen::Index n) {
  Matrix f(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) f.row(i) << static_cast<double>(i), -static_cast<double>(i);
  return f;
}

TEST(ProjectToSphere, KeepsTheOutermostPointOfACell) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 4);
  const Vec3 a = g.anchor(7);
  Points p(2, 3);
  p.row(0) = 0.3 * a.transpose();
  p.row(1) = 0.5 * a.transpose();
  const SphericalFeatureMap m = project_to_sphere(g, p, RowIds(2));
  EXPECT_TRUE(m.assigned[7]);
  EXPECT_EQ(m.source_index[7], 1);
  EXPECT_EQ(m.features(7, 0), 1.0);
  EXPECT_EQ(m.assigned_count(), 1);
}

TEST(ProjectToSphere, RadiusTiesGoToLowestIndex) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 4);
  Points p(3, 3);
  p.row(0) = 0.2 * g.anchor(3).transpose();
  p.row(1) = 0.4 * g.anchor(3).transpose();
  p.row(2) = 0.4 * g.anchor(3).transpose();
  EXPECT_EQ(project_to_sphere(g, p, RowIds(3)).source_index[3], 1);
}

TEST(ProjectToSphere, MatchesBruteForceOracle) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 2);
  Rng rng(1);
  const Points p = RandomPoints(rng, 300);
  const SphericalFeatureMap m = project_to_sphere(g, p, RowIds(300));
  for (Eigen::Index c = 0; c < g.size(); ++c) {
    int best = -1;
    for (int i = 0; i < 300; ++i) {
      if (g.ang2pix(p.row(i).transpose()) != c) continue;
      if (best < 0 || p.row(i).norm() > p.row(best).norm()) best = i;
    }
    EXPECT_EQ(m.source_index[c], best);
    EXPECT_EQ(m.assigned[c], best >= 0);
    if (best < 0) {
      EXPECT_EQ(m.features.row(c).squaredNorm(), 0.0);
    }
  }
  EXPECT_EQ(m.assigned_weights().sum(), m.assigned_count());
}

TEST(ProjectToSphere, DenseCloudFillsEveryCell) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 4);
  Rng rng(2);
  const SphericalFeatureMap m = project_to_sphere(g, RandomPoints(rng, 20000), RowIds(20000));
  EXPECT_EQ(m.assigned_count(), g.size());
}

TEST(ProjectToSphere, SkipsPointsAtTheOrigin) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 1);
  const SphericalFeatureMap m = project_to_sphere(g, Points::Zero(5, 3), RowIds(5));
  EXPECT_EQ(m.assigned_count(), 0);
  EXPECT_EQ(m.cells(), 12);
}

TEST(ProjectToSphere, RejectsBadInputs) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 1);
  EXPECT_THROW(project_to_sphere(g, Points(0, 3), Matrix(0, 2)), InvalidArgument);
  EXPECT_THROW(project_to_sphere(g, Points::Ones(3, 3), RowIds(2)), InvalidArgument);
}

TEST(GtSphericalNocs, IdentityGivesTheAnchors) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 4);
  EXPECT_EQ(gt_spherical_nocs(Rotation(), g), g.anchors());
}

TEST(GtSphericalNocs, RowsAreInverseRotatedAnchors) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 4);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Rotation r = random_rotation(rng);
    const Points o = gt_spherical_nocs(r, g);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      EXPECT_NEAR(o.row(i).norm(), 1.0, 1e-12);
      EXPECT_LT((r * Vec3(o.row(i).transpose()) - g.anchor(i)).norm(), 1e-12);
    }
  }
}

}  // namespace
}  // namespace sphcorr
