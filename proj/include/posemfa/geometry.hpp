#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <vector>

namespace posemfa {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Triangle = std::array<int, 3>;

/// Geodesic distance on SO(3): the rotation angle of a * b^T, in [0, pi].
double rotation_angle(const Mat3& a, const Mat3& b);

/// Rotation angle of a single rotation matrix.
double rotation_angle(const Mat3& r);

/// Max-norm of R^T R - I.
double orthogonality_error(const Mat3& r);

/// Rotation of `angle` radians about the unit axis `axis`.
Mat3 axis_angle(const Vec3& axis, double angle);

}  // namespace posemfa
