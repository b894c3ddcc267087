#pragma once

#include "rtk/camera.hpp"
#include "rtk/mesh.hpp"

#include <span>
#include <vector>

namespace rtk {

// Per-pixel part ids, row-major; 0 is background, parts are 1..14.
struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<int> ids;

  int at(int x, int y) const {
    return ids[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  void validate() const;
};

struct ContourPoint {
  Vec2 pixel;  // (column, row)
  int label = 0;
};

struct ControlPoint {
  int vertex = 0;
  Vec3 target = Vec3::Zero();
};

// Boundary pixels of every labeled region: pixels whose 4-neighborhood holds
// a different id or leaves the image. Each label's boundary is visited in
// raster order and every `stride`-th pixel kept.
std::vector<ContourPoint> extract_contours(const LabelImage& image, int stride = 5);

struct ControlMatch {
  std::vector<ControlPoint> controls;
  // Contour points whose label no vertex carries.
  std::size_t skipped = 0;
};

// For each contour point picks the same-label vertex whose projection is
// nearest (ties to the lowest index) and targets the back-projection of the
// contour pixel at that vertex's camera depth. A vertex picked twice keeps
// its last target. Throws BehindCameraError if a candidate vertex is behind
// the camera.
ControlMatch match_control_points(
    const LabeledMesh& mesh,
    const Camera& camera,
    std::span<const ContourPoint> contours);

} // namespace rtk
