#include "posemfa/geometry.hpp"

#include <cmath>

namespace posemfa {

double rotation_angle(const Mat3& r) {
  // atan2 form stays accurate near 0 and pi where acos((tr-1)/2) does not.
  const Eigen::Quaterniond q(r);
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

double rotation_angle(const Mat3& a, const Mat3& b) {
  return rotation_angle(Mat3(a * b.transpose()));
}

double orthogonality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace posemfa
