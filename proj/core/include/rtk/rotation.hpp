#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rtk {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

Mat3 skew(const Vec3& v);

// Exponential map from an axis-angle vector to a rotation matrix (Rodrigues).
// Small angles fall back to the Taylor expansion of the coefficients.
Mat3 exp_map(const Vec3& omega);

// Left Jacobian of SO(3): exp(omega + d) ~= exp(J_l(omega) d) * exp(omega).
Mat3 left_jacobian(const Vec3& omega);

// Inverse of exp_map; the result has magnitude in [0, pi].
Vec3 log_map(const Mat3& rotation);

// Equivalent axis-angle with magnitude in [0, pi].
Vec3 canonicalize_axis_angle(const Vec3& omega);

bool is_rotation(const Mat3& r, double tol = 1e-9);

} // namespace rtk
