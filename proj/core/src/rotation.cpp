#include "rtk/rotation.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace rtk {

namespace {

// Below this angle the closed-form coefficients lose precision.
constexpr double kSmallAngle = 1e-4;

} // namespace

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Mat3 exp_map(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;
  double b;
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = skew(omega);
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 left_jacobian(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double b;
  double c;
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 k = skew(omega);
  return Mat3::Identity() + b * k + c * k * k;
}

Vec3 log_map(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  Vec3 v = aa.angle() * aa.axis();
  return canonicalize_axis_angle(v);
}

Vec3 canonicalize_axis_angle(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta <= std::numbers::pi) {
    return omega;
  }
  const Vec3 axis = omega / theta;
  double wrapped = std::fmod(theta, 2.0 * std::numbers::pi);
  if (wrapped > std::numbers::pi) {
    wrapped -= 2.0 * std::numbers::pi;
  }
  return wrapped * axis;
}

bool is_rotation(const Mat3& r, double tol) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
      std::abs(r.determinant() - 1.0) <= tol;
}

} // namespace rtk
