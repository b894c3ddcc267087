#pragma once

#include "rtk/rotation.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace rtk {

// Semantic body parts are numbered 1..14; 0 is background in label images.
inline constexpr int kBackgroundLabel = 0;
inline constexpr int kPartCount = 14;

struct LabeledMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> labels;

  // Throws InputError for out-of-range indices, degenerate triangles
  // (area <= 1e-12 m^2), missing labels or labels outside 1..14.
  void validate() const;
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// Wavefront OBJ (v / f records; f entries may carry /vt/vn suffixes and
// polygons are fan-triangulated) plus a sidecar with one integer label per
// vertex, one per line.
LabeledMesh read_labeled_mesh(const std::filesystem::path& obj, const std::filesystem::path& labels);
void write_obj(const LabeledMesh& mesh, const std::filesystem::path& path);
void write_labels(const LabeledMesh& mesh, const std::filesystem::path& path);

} // namespace rtk
