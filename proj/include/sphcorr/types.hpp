#ifndef SPHCORR_TYPES_HPP_
#define SPHCORR_TYPES_HPP_

#include <Eigen/Core>

namespace sphcorr {

// N x 3 row-per-point storage shared by point clouds, anchors and NOCS maps.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Colors = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

}  // namespace sphcorr

#endif  // SPHCORR_TYPES_HPP_
