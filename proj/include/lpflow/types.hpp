#pragma once

#include <Eigen/Dense>

namespace lpflow {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Nonzero field speed below this is treated as a singularity.
inline constexpr double kSingularityFloor = 1e-12;

}  // namespace lpflow
