#ifndef SPHCORR_SPHERE_GRID_HPP_
#define SPHCORR_SPHERE_GRID_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sphcorr/errors.hpp"
#include "sphcorr/rng.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr {

enum class GridKind { kHealpix, kEquirectangular, kFibonacci };

inline std::string_view to_string(GridKind k) {
  switch (k) {
    case GridKind::kHealpix: return "healpix";
    case GridKind::kEquirectangular: return "equirectangular";
    case GridKind::kFibonacci: return "fibonacci";
  }
  return "?";
}

inline GridKind parse_grid_kind(std::string_view s) {
  if (s == "healpix") return GridKind::kHealpix;
  if (s == "equirectangular") return GridKind::kEquirectangular;
  if (s == "fibonacci") return GridKind::kFibonacci;
  throw InvalidArgument("unknown grid kind '" + std::string(s) + "'");
}

namespace detail {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline std::int64_t isqrt(std::int64_t v) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v) + 0.5));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

inline std::int64_t imod(std::int64_t a, std::int64_t m) {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

inline Vec3 from_z_phi(double z, double phi) {
  const double st = std::sqrt(std::max(0.0, (1.0 - z) * (1.0 + z)));
  return {st * std::cos(phi), st * std::sin(phi), z};
}

// Azimuth in [0, 2pi).
inline double azimuth(const Vec3& v) {
  double phi = std::atan2(v.y(), v.x());
  if (phi < 0.0) phi += kTwoPi;
  if (phi >= kTwoPi) phi = 0.0;
  return phi;
}

// HEALPix RING scheme (Gorski et al. conventions), z = cos(colatitude).
inline std::int64_t healpix_ang2pix_ring(std::int64_t nside, double z, double phi) {
  const double za = std::abs(z);
  double tt = std::fmod(phi * 2.0 / kPi, 4.0);  // in [0, 4)
  if (tt < 0.0) tt += 4.0;
  const std::int64_t ncap = 2 * nside * (nside - 1);
  const std::int64_t npix = 12 * nside * nside;
  if (za <= 2.0 / 3.0) {
    const double t1 = static_cast<double>(nside) * (0.5 + tt);
    const double t2 = static_cast<double>(nside) * z * 0.75;
    const auto jp = static_cast<std::int64_t>(t1 - t2);
    const auto jm = static_cast<std::int64_t>(t1 + t2);
    const std::int64_t ir = nside + 1 + jp - jm;  // 1 .. 2 nside + 1
    const std::int64_t kshift = 1 - (ir & 1);
    const std::int64_t ip = imod((jp + jm - nside + kshift + 1) / 2, 4 * nside);
    return ncap + (ir - 1) * 4 * nside + ip;
  }
  const double tp = tt - std::floor(tt);
  const double tmp = static_cast<double>(nside) * std::sqrt(3.0 * (1.0 - za));
  const auto jp = static_cast<std::int64_t>(tp * tmp);
  const auto jm = static_cast<std::int64_t>((1.0 - tp) * tmp);
  const std::int64_t ir = jp + jm + 1;  // ring counted from the nearest pole
  const std::int64_t ip = imod(static_cast<std::int64_t>(tt * static_cast<double>(ir)), 4 * ir);
  return z > 0.0 ? 2 * ir * (ir - 1) + ip : npix - 2 * ir * (ir + 1) + ip;
}

// Pixel center as (z, phi).
inline std::pair<double, double> healpix_pix2ang_ring(std::int64_t nside, std::int64_t pix) {
  const std::int64_t ncap = 2 * nside * (nside - 1);
  const std::int64_t npix = 12 * nside * nside;
  const double fact2 = 4.0 / static_cast<double>(npix);
  if (pix < ncap) {
    const std::int64_t iring = (1 + isqrt(1 + 2 * pix)) >> 1;
    const std::int64_t iphi = pix + 1 - 2 * iring * (iring - 1);
    const double z = 1.0 - static_cast<double>(iring * iring) * fact2;
    const double phi = (static_cast<double>(iphi) - 0.5) * kPi / (2.0 * static_cast<double>(iring));
    return {z, phi};
  }
  if (pix < npix - ncap) {
    const std::int64_t ip = pix - ncap;
    const std::int64_t iring = ip / (4 * nside) + nside;
    const std::int64_t iphi = ip % (4 * nside) + 1;
    const double fodd = ((iring + nside) & 1) ? 1.0 : 0.5;
    const double fact1 = 2.0 / (3.0 * static_cast<double>(nside));
    const double z = static_cast<double>(2 * nside - iring) * fact1;
    const double phi = (static_cast<double>(iphi) - fodd) * kPi / (2.0 * static_cast<double>(nside));
    return {z, phi};
  }
  const std::int64_t ip = npix - pix;
  const std::int64_t iring = (1 + isqrt(2 * ip - 1)) >> 1;
  const std::int64_t iphi = 4 * iring + 1 - (ip - 2 * iring * (iring - 1));
  const double z = -1.0 + static_cast<double>(iring * iring) * fact2;
  const double phi = (static_cast<double>(iphi) - 0.5) * kPi / (2.0 * static_cast<double>(iring));
  return {z, phi};
}

}  // namespace detail

// A partition of the unit sphere into cells, each represented by its center
// anchor. Immutable after construction.
class SphericalGrid {
 public:
  // resolution: N_side (power of two) for HEALPix, bands per axis for the
  // equirectangular grid (resolution x resolution cells), point count for
  // the Fibonacci lattice.
  static SphericalGrid build(GridKind kind, int resolution) {
    if (resolution < 1) throw InvalidArgument("grid resolution must be >= 1");
    SphericalGrid g;
    g.kind_ = kind;
    switch (kind) {
      case GridKind::kHealpix: {
        if ((resolution & (resolution - 1)) != 0) {
          throw InvalidArgument("HEALPix N_side must be a power of two");
        }
        g.nside_ = resolution;
        const std::int64_t n = 12LL * resolution * resolution;
        g.anchors_.resize(n, 3);
        for (std::int64_t i = 0; i < n; ++i) {
          const auto [z, phi] = detail::healpix_pix2ang_ring(resolution, i);
          g.anchors_.row(i) = detail::from_z_phi(z, phi).transpose();
        }
        break;
      }
      case GridKind::kEquirectangular: {
        g.n_lat_ = resolution;
        g.n_lon_ = resolution;
        g.anchors_.resize(static_cast<Eigen::Index>(resolution) * resolution, 3);
        for (int i = 0; i < g.n_lat_; ++i) {
          const double theta = (i + 0.5) * detail::kPi / g.n_lat_;
          for (int j = 0; j < g.n_lon_; ++j) {
            const double phi = (j + 0.5) * detail::kTwoPi / g.n_lon_;
            g.anchors_.row(i * g.n_lon_ + j) = detail::from_z_phi(std::cos(theta), phi).transpose();
          }
        }
        break;
      }
      case GridKind::kFibonacci: {
        g.anchors_.resize(resolution, 3);
        const double golden_angle = detail::kPi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < resolution; ++i) {
          const double z = 1.0 - (2.0 * i + 1.0) / resolution;
          const double phi = std::fmod(golden_angle * i, detail::kTwoPi);
          g.anchors_.row(i) = detail::from_z_phi(z, phi).transpose();
        }
        break;
      }
    }
    g.resolution_ = resolution;
    return g;
  }

  GridKind kind() const { return kind_; }
  int resolution() const { return resolution_; }
  Eigen::Index size() const { return anchors_.rows(); }
  const Points& anchors() const { return anchors_; }
  Vec3 anchor(Eigen::Index i) const { return anchors_.row(i).transpose(); }

  // Cell containing direction v (normalized internally). Latitude/longitude
  // intervals are half-open; nearest-anchor ties go to the lowest index.
  Eigen::Index ang2pix(const Vec3& v) const {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("ang2pix of a zero or non-finite vector");
    const Vec3 u = v / n;
    const double z = std::clamp(u.z(), -1.0, 1.0);
    switch (kind_) {
      case GridKind::kHealpix:
        return static_cast<Eigen::Index>(detail::healpix_ang2pix_ring(nside_, z, detail::azimuth(u)));
      case GridKind::kEquirectangular: {
        const double theta = std::acos(z);
        int i = static_cast<int>(theta / detail::kPi * n_lat_);
        i = std::clamp(i, 0, n_lat_ - 1);
        int j = static_cast<int>(detail::azimuth(u) / detail::kTwoPi * n_lon_);
        j = std::clamp(j, 0, n_lon_ - 1);
        return static_cast<Eigen::Index>(i) * n_lon_ + j;
      }
      case GridKind::kFibonacci: {
        Eigen::Index best = 0;
        double best_dot = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < anchors_.rows(); ++i) {
          const double d = anchors_.row(i).dot(u.transpose());
          if (d > best_dot) {
            best_dot = d;
            best = i;
          }
        }
        return best;
      }
    }
    return 0;
  }

  // CSV rows "index,x,y,z" for plotting.
  void write_csv(std::ostream& os) const {
    os << "index,x,y,z\n";
    char buf[128];
    for (Eigen::Index i = 0; i < anchors_.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(i),
                    anchors_(i, 0), anchors_(i, 1), anchors_(i, 2));
      os << buf;
    }
  }

 private:
  GridKind kind_ = GridKind::kHealpix;
  int resolution_ = 0;
  std::int64_t nside_ = 0;
  int n_lat_ = 0;
  int n_lon_ = 0;
  Points anchors_;
};

struct SolidAngleStats {
  std::vector<double> per_cell;  // steradians
  double max_min_ratio = 0.0;    // +inf when some cell received no samples
  double total = 0.0;
};

// Monte-Carlo solid angle of every cell. Directions are drawn by jittered
// stratification of the equal-area map (z, phi) in [-1, 1] x [0, 2 pi): one
// uniform sample per stratum on an n_z x n_phi lattice with n_z ~ sqrt(n).
// Each sample is still uniform on its stratum, so the estimate is unbiased,
// while its variance comes only from strata cut by cell boundaries.
inline SolidAngleStats solid_angle_stats(const SphericalGrid& grid, std::int64_t n_samples,
                                         std::uint64_t seed) {
  if (n_samples < 100000) throw InvalidArgument("solid_angle_stats needs >= 1e5 samples");
  const auto nz = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n_samples)));
  const std::int64_t nphi = n_samples / nz;
  const std::int64_t used = nz * nphi;
  std::vector<std::int64_t> counts(grid.size(), 0);
  Rng rng(seed);
  for (std::int64_t i = 0; i < nz; ++i) {
    for (std::int64_t j = 0; j < nphi; ++j) {
      const double z = -1.0 + 2.0 * (static_cast<double>(i) + rng.uniform()) / static_cast<double>(nz);
      const double phi = 2.0 * std::numbers::pi * (static_cast<double>(j) + rng.uniform()) / static_cast<double>(nphi);
      ++counts[grid.ang2pix(detail::from_z_phi(z, phi))];
    }
  }
  n_samples = used;
  SolidAngleStats out;
  out.per_cell.resize(counts.size());
  const double w = 4.0 * std::numbers::pi / static_cast<double>(n_samples);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out.per_cell[i] = w * static_cast<double>(counts[i]);
    out.total += out.per_cell[i];
  }
  const auto [mn, mx] = std::minmax_element(out.per_cell.begin(), out.per_cell.end());
  out.max_min_ratio = *mn > 0.0 ? *mx / *mn : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace sphcorr

#endif  // SPHCORR_SPHERE_GRID_HPP_
