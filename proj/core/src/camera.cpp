#include "rtk/camera.hpp"

#include <cmath>
#include <sstream>

namespace rtk {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw InputError("camera focal lengths must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw InputError("camera principal point must be finite");
  }
  if (width <= 0 || height <= 0) {
    throw InputError("camera image size must be positive");
  }
}

Vec2 project(const Vec3& p, const CameraIntrinsics& k) {
  if (!(p.z() > kMinDepth)) {
    std::ostringstream msg;
    msg << "point behind camera (z = " << p.z() << ")";
    throw BehindCameraError(msg.str());
  }
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

ProjectionJacobian project_jacobian(const Vec3& p, const CameraIntrinsics& k) {
  if (!(p.z() > kMinDepth)) {
    throw BehindCameraError("point behind camera");
  }
  const double iz = 1.0 / p.z();
  ProjectionJacobian j;
  j << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz, 0.0, k.fy * iz, -k.fy * p.y() * iz * iz;
  return j;
}

Vec3 Camera::back_project(const Vec2& pixel, double depth) const {
  const Vec3 cam(
      (pixel.x() - intrinsics.cx) * depth / intrinsics.fx,
      (pixel.y() - intrinsics.cy) * depth / intrinsics.fy,
      depth);
  return world_to_camera.rotation.transpose() * (cam - world_to_camera.translation);
}

void Camera::validate() const {
  intrinsics.validate();
  if (!is_rotation(world_to_camera.rotation, 1e-6)) {
    throw InputError("camera pose rotation is not a proper rotation matrix");
  }
  if (!world_to_camera.translation.allFinite()) {
    throw InputError("camera pose translation must be finite");
  }
}

} // namespace rtk
