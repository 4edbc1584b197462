#include "sphcorr/sphere_grid.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "sphcorr/rng.hpp"

namespace sphcorr {
namespace {

constexpr double kPi = std::numbers::pi;

Vec3 RandomDirection(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

TEST(SphericalGrid, HealpixCellCounts) {
  EXPECT_EQ(SphericalGrid::build(GridKind::kHealpix, 1).size(), 12);
  EXPECT_EQ(SphericalGrid::build(GridKind::kHealpix, 2).size(), 48);
  EXPECT_EQ(SphericalGrid::build(GridKind::kHealpix, 4).size(), 192);
  EXPECT_EQ(SphericalGrid::build(GridKind::kHealpix, 8).size(), 768);
}

TEST(SphericalGrid, EquirectangularAndFibonacciCounts) {
  EXPECT_EQ(SphericalGrid::build(GridKind::kEquirectangular, 28).size(), 784);
  EXPECT_EQ(SphericalGrid::build(GridKind::kFibonacci, 768).size(), 768);
}

TEST(SphericalGrid, RejectsBadResolution) {
  EXPECT_THROW(SphericalGrid::build(GridKind::kHealpix, 0), InvalidArgument);
  EXPECT_THROW(SphericalGrid::build(GridKind::kHealpix, 3), InvalidArgument);
  EXPECT_THROW(SphericalGrid::build(GridKind::kEquirectangular, 0), InvalidArgument);
  EXPECT_THROW(SphericalGrid::build(GridKind::kFibonacci, -2), InvalidArgument);
}

TEST(SphericalGrid, HealpixRingLayout) {
  // Ring i (1-based) of the north cap holds 4i cells; the belt rings 4 N_side.
  const int nside = 4;
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, nside);
  std::vector<double> zs;
  std::vector<int> per_ring;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double z = g.anchor(i).z();
    if (zs.empty() || std::abs(zs.back() - z) > 1e-12) {
      zs.push_back(z);
      per_ring.push_back(0);
    }
    ++per_ring.back();
  }
  ASSERT_EQ(per_ring.size(), 4u * nside - 1);
  for (int i = 1; i < nside; ++i) {
    EXPECT_EQ(per_ring[i - 1], 4 * i);
    EXPECT_EQ(per_ring[per_ring.size() - i], 4 * i);
  }
  for (std::size_t r = nside - 1; r + nside <= per_ring.size(); ++r) EXPECT_EQ(per_ring[r], 4 * nside);
  // Cap ring z values: 1 - i^2 / (3 N_side^2).
  EXPECT_NEAR(zs[0], 1.0 - 1.0 / (3.0 * nside * nside), 1e-15);
}

class AllGrids : public ::testing::TestWithParam<std::pair<GridKind, int>> {};

TEST_P(AllGrids, AnchorsAreUnitAndSelfConsistent) {
  const SphericalGrid g = SphericalGrid::build(GetParam().first, GetParam().second);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(g.anchor(i).norm(), 1.0, 1e-12);
    EXPECT_EQ(g.ang2pix(g.anchor(i)), i);
    EXPECT_EQ(g.ang2pix(3.5 * g.anchor(i)), i);
  }
}

TEST_P(AllGrids, SolidAnglesSumToFourPi) {
  const SphericalGrid g = SphericalGrid::build(GetParam().first, GetParam().second);
  const SolidAngleStats st = solid_angle_stats(g, 200000, 3);
  EXPECT_EQ(st.per_cell.size(), static_cast<std::size_t>(g.size()));
  EXPECT_NEAR(st.total, 4.0 * kPi, 0.01 * 4.0 * kPi);
}

INSTANTIATE_TEST_SUITE_P(Kinds, AllGrids,
                         ::testing::Values(std::make_pair(GridKind::kHealpix, 1), std::make_pair(GridKind::kHealpix, 2),
                                           std::make_pair(GridKind::kHealpix, 4), std::make_pair(GridKind::kHealpix, 8),
                                           std::make_pair(GridKind::kEquirectangular, 14),
                                           std::make_pair(GridKind::kEquirectangular, 28),
                                           std::make_pair(GridKind::kFibonacci, 192),
                                           std::make_pair(GridKind::kFibonacci, 768)));

TEST(Ang2Pix, RejectsZeroVector) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 2);
  EXPECT_THROW(g.ang2pix(Vec3::Zero()), InvalidArgument);
}

TEST(Ang2Pix, NorthPoleLandsInTopBand) {
  const int n = 28;
  const SphericalGrid g = SphericalGrid::build(GridKind::kEquirectangular, n);
  EXPECT_LT(g.ang2pix(Vec3::UnitZ()), n);
  EXPECT_GE(g.ang2pix(-Vec3::UnitZ()), n * (n - 1));
}

TEST(Ang2Pix, EquirectangularHalfOpenBoundaries) {
  // A direction exactly on a band boundary belongs to the band below it.
  const int n = 4;
  const SphericalGrid g = SphericalGrid::build(GridKind::kEquirectangular, n);
  const Vec3 equator(1.0, 0.0, 0.0);  // theta = pi/2 is the start of band 2
  EXPECT_EQ(g.ang2pix(equator) / n, 2);
  EXPECT_EQ(g.ang2pix(equator) % n, 0);
}

TEST(Ang2Pix, FibonacciTiesGoToLowestIndex) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kFibonacci, 12);
  // Brute-force nearest-anchor oracle.
  Rng rng(4);
  for (int t = 0; t < 2000; ++t) {
    const Vec3 v = RandomDirection(rng);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < g.size(); ++i) {
      if (g.anchor(i).dot(v) > g.anchor(best).dot(v)) best = i;
    }
    EXPECT_EQ(g.ang2pix(v), best);
  }
}

TEST(Ang2Pix, HealpixUniformCounts) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 8);
  const int n = 1000000;
  std::vector<int> counts(g.size(), 0);
  Rng rng(8);
  for (int i = 0; i < n; ++i) ++counts[g.ang2pix(RandomDirection(rng))];
  const double p = 1.0 / static_cast<double>(g.size());
  const double mean = n * p, sd = std::sqrt(n * p * (1.0 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - mean), 5.0 * sd);
}

TEST(SolidAngle, HealpixEqualAreaAndEquirectangularSkew) {
  const SolidAngleStats hp = solid_angle_stats(SphericalGrid::build(GridKind::kHealpix, 8), 10000000, 21);
  EXPECT_LE(hp.max_min_ratio, 1.05);
  for (double a : hp.per_cell) EXPECT_NEAR(a, 4.0 * kPi / 768.0, 0.02 * 4.0 * kPi / 768.0);

  // Analytic band areas: polar cap band vs equatorial band of a 28 x 28 grid.
  const int n = 28;
  const double polar = 1.0 - std::cos(kPi / n);
  const double equatorial = std::cos((n / 2 - 1) * kPi / n) - std::cos((n / 2) * kPi / n);
  EXPECT_NEAR(equatorial / polar, 17.8, 0.05);
  const SolidAngleStats eq = solid_angle_stats(SphericalGrid::build(GridKind::kEquirectangular, n), 10000000, 22);
  EXPECT_GE(eq.max_min_ratio, 10.0);
}

TEST(SolidAngle, RejectsTooFewSamples) {
  EXPECT_THROW(solid_angle_stats(SphericalGrid::build(GridKind::kHealpix, 1), 1000, 1), InvalidArgument);
}

TEST(GridCsv, HeaderAndRows) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 1);
  std::ostringstream os;
  g.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "index,x,y,z");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 12);
}

TEST(GridKind, ParseAndPrint) {
  for (GridKind k : {GridKind::kHealpix, GridKind::kEquirectangular, GridKind::kFibonacci}) {
    EXPECT_EQ(parse_grid_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_grid_kind("cube"), InvalidArgument);
}

TEST(SphericalGrid, RotatingADirectionChangesItsCell) {
  const SphericalGrid g = SphericalGrid::build(GridKind::kHealpix, 4);
  const Vec3 v = g.anchor(10);
  const Vec3 w(-v.y(), v.x(), v.z());  // quarter turn about z
  EXPECT_NE(g.ang2pix(w), g.ang2pix(v));
}

}  // namespace
}  // namespace sphcorr
