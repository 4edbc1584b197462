#include "sphcorr/features.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "sphcorr/rng.hpp"
#include "sphcorr/so3.hpp"

namespace sphcorr {
namespace {

Points RandomPoints(Rng& rng, int n) {
  Points p(n, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = 0.2 * rng.normal();
  return p;
}

Colors RandomColors(Rng& rng, int n) {
  Colors c(n, 3);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform();
  return c;
}

TEST(RadiusFeature, IsTheEuclideanNorm) {
  Points p(2, 3);
  p << 3, 4, 0, 0, 0, 0;
  const Vector r = radius_feature(p);
  EXPECT_EQ(r[0], 5.0);
  EXPECT_EQ(r[1], 0.0);
}

TEST(Knn, MatchesBruteForceOrder) {
  Rng rng(1);
  const Points p = RandomPoints(rng, 60);
  const auto nn = knn(p, 5);
  for (int i = 0; i < 60; ++i) {
    std::vector<int> idx;
    for (int j = 0; j < 60; ++j) if (j != i) idx.push_back(j);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return (p.row(a) - p.row(i)).squaredNorm() < (p.row(b) - p.row(i)).squaredNorm();
    });
    for (int j = 0; j < 5; ++j) EXPECT_EQ(nn[i][j].second, idx[j]);
  }
}

TEST(Knn, TiesGoToLowestIndex) {
  Points p(4, 3);
  p << 0, 0, 0, 5, 0, 0, 1, 0, 0, -1, 0, 0;
  const auto nn = knn(p, 2);
  EXPECT_EQ(nn[0][0].second, 2);
  EXPECT_EQ(nn[0][1].second, 3);
}

TEST(Knn, RejectsBadK) {
  const Points p = Points::Zero(4, 3);
  EXPECT_THROW(knn(p, 0), InvalidArgument);
  EXPECT_THROW(knn(p, 4), InvalidArgument);
}

TEST(RawDescriptor, DistancesAscend) {
  Rng rng(2);
  const Points p = RandomPoints(rng, 100);
  const FeatureConfig cfg;
  const Matrix raw = knn_raw_descriptor(p, RandomColors(rng, 100), cfg);
  ASSERT_EQ(raw.cols(), cfg.k + 3);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (int j = 1; j < cfg.k; ++j) EXPECT_LE(raw(i, j - 1), raw(i, j));
  }
}

TEST(AssembleFeatures, ChannelLayout) {
  Rng rng(3);
  const Points p = RandomPoints(rng, 50);
  const Colors c = RandomColors(rng, 50);
  const FeatureConfig cfg;
  const PointFeatures f = assemble_features(p, c, cfg);
  ASSERT_EQ(f.values.cols(), cfg.width);
  EXPECT_EQ(f.geom_width, cfg.width - 4);
  EXPECT_EQ(f.values.leftCols(3), c);
  EXPECT_EQ(f.values.col(PointFeatures::kRadiusOffset), radius_feature(p));
}

TEST(AssembleFeatures, RotationInvariant) {
  Rng rng(4);
  const Points p = RandomPoints(rng, 300);
  const Colors c = RandomColors(rng, 300);
  const FeatureConfig cfg;
  const Matrix f = assemble_features(p, c, cfg).values;
  for (int t = 0; t < 20; ++t) {
    const Matrix g = assemble_features(apply(random_rotation(rng), p), c, cfg).values;
    EXPECT_LT((f - g).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(AssembleFeatures, InjectedCoordinatesBreakInvariance) {
  Rng rng(5);
  const Points p = RandomPoints(rng, 300);
  const Colors c = RandomColors(rng, 300);
  FeatureConfig cfg;
  cfg.inject_xyz = true;
  const Matrix f = assemble_features(p, c, cfg).values;
  const Matrix g = assemble_features(apply(rot_z(1.0), p), c, cfg).values;
  EXPECT_GT((f - g).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(AssembleFeatures, PermutationEquivariant) {
  Rng rng(6);
  const int n = 120;
  const Points p = RandomPoints(rng, n);
  const Colors c = RandomColors(rng, n);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  Points pp(n, 3);
  Colors cp(n, 3);
  for (int i = 0; i < n; ++i) {
    pp.row(i) = p.row(perm[i]);
    cp.row(i) = c.row(perm[i]);
  }
  const FeatureConfig cfg;
  const Matrix f = assemble_features(p, c, cfg).values;
  const Matrix g = assemble_features(pp, cp, cfg).values;
  for (int i = 0; i < n; ++i) EXPECT_LT((g.row(i) - f.row(perm[i])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LocalGeometryMap, SeededAndFixed) {
  FeatureConfig a, b;
  b.projection_seed = a.projection_seed + 1;
  EXPECT_EQ(local_geometry_map(a), local_geometry_map(a));
  EXPECT_NE(local_geometry_map(a), local_geometry_map(b));
  EXPECT_EQ(local_geometry_map(a).rows(), raw_descriptor_width(a));
  EXPECT_EQ(local_geometry_map(a).cols(), a.width - 4);
}

TEST(AssembleFeatures, RejectsBadInputs) {
  Rng rng(7);
  const Points p = RandomPoints(rng, 20);
  EXPECT_THROW(assemble_features(p, RandomColors(rng, 19), FeatureConfig{}), InvalidArgument);
  FeatureConfig narrow;
  narrow.width = 4;
  EXPECT_THROW(assemble_features(p, RandomColors(rng, 20), narrow), InvalidArgument);
}

}  // namespace
}  // namespace sphcorr
