#include "rtk/contours.hpp"

#include "rtk/error.hpp"

#include <limits>
#include <map>
#include <unordered_map>

namespace rtk {

void LabelImage::validate() const {
  if (width < 0 || height < 0 || ids.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InputError("label image dimensions do not match its data");
  }
  for (int id : ids) {
    if (id < kBackgroundLabel || id > kPartCount) {
      throw InputError("label image contains id " + std::to_string(id) + "; expected 0 (background) or 1.." +
                       std::to_string(kPartCount));
    }
  }
}

std::vector<ContourPoint> extract_contours(const LabelImage& image, int stride) {
  image.validate();
  if (stride < 1) {
    throw InputError("contour stride must be at least 1");
  }
  std::map<int, std::size_t> seen;
  std::vector<ContourPoint> out;
  const auto differs = [&](int x, int y, int id) {
    if (x < 0 || y < 0 || x >= image.width || y >= image.height) {
      return true;
    }
    return image.at(x, y) != id;
  };
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const int id = image.at(x, y);
      if (id == kBackgroundLabel) {
        continue;
      }
      if (differs(x - 1, y, id) || differs(x + 1, y, id) || differs(x, y - 1, id) || differs(x, y + 1, id)) {
        if (seen[id]++ % static_cast<std::size_t>(stride) == 0) {
          out.push_back({Vec2(x, y), id});
        }
      }
    }
  }
  return out;
}

ControlMatch match_control_points(
    const LabeledMesh& mesh,
    const Camera& camera,
    std::span<const ContourPoint> contours) {
  mesh.validate();
  std::unordered_map<int, std::vector<int>> by_label;
  std::vector<Vec2> projected(mesh.vertices.size());
  std::vector<double> depth(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Vec3 cam = camera.to_camera(mesh.vertices[v]);
    try {
      projected[v] = project(cam, camera.intrinsics);
    } catch (const BehindCameraError&) {
      throw BehindCameraError("mesh vertex " + std::to_string(v) + " is behind the camera");
    }
    depth[v] = cam.z();
    by_label[mesh.labels[v]].push_back(static_cast<int>(v));
  }

  ControlMatch out;
  std::unordered_map<int, std::size_t> slot;
  for (const ContourPoint& cp : contours) {
    const auto it = by_label.find(cp.label);
    if (it == by_label.end()) {
      ++out.skipped;
      continue;
    }
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int v : it->second) {
      const double d = (projected[v] - cp.pixel).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = v;
      }
    }
    const ControlPoint control{best, camera.back_project(cp.pixel, depth[best])};
    const auto [pos, inserted] = slot.try_emplace(best, out.controls.size());
    if (inserted) {
      out.controls.push_back(control);
    } else {
      out.controls[pos->second] = control;
    }
  }
  return out;
}

} // namespace rtk
