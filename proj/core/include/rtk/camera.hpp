#pragma once

#include "rtk/error.hpp"
#include "rtk/skeleton.hpp"

#include <Eigen/Core>

namespace rtk {

inline constexpr double kMinDepth = 1e-6;

class BehindCameraError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct CameraIntrinsics {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 960.0;
  double cy = 540.0;
  int width = 1920;
  int height = 1080;

  void validate() const;
};

using ProjectionJacobian = Eigen::Matrix<double, 2, 3>;

// Pinhole projection of a camera-frame point. Throws BehindCameraError when
// p.z() <= kMinDepth.
Vec2 project(const Vec3& p, const CameraIntrinsics& k);
ProjectionJacobian project_jacobian(const Vec3& p, const CameraIntrinsics& k);

// Intrinsics plus a world-to-camera rigid transform (identity by default, so
// world and camera frames coincide).
struct Camera {
  CameraIntrinsics intrinsics;
  RigidTransform world_to_camera;

  Vec3 to_camera(const Vec3& world) const {
    return world_to_camera.apply(world);
  }
  Vec2 project_world(const Vec3& world) const {
    return project(to_camera(world), intrinsics);
  }
  // d(pixel)/d(world point).
  ProjectionJacobian project_world_jacobian(const Vec3& world) const {
    return project_jacobian(to_camera(world), intrinsics) * world_to_camera.rotation;
  }
  // World point on the ray through `pixel` at camera-frame depth `depth`.
  Vec3 back_project(const Vec2& pixel, double depth) const;

  void validate() const;
};

} // namespace rtk
