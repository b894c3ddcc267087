#pragma once

#include "rtk/arap.hpp"
#include "rtk/camera.hpp"
#include "rtk/contours.hpp"
#include "rtk/reconstruct.hpp"
#include "rtk/retarget.hpp"
#include "rtk/synth.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rtk {

using Json = nlohmann::json;

// Parse errors carry the line and column; InputError on failure.
Json read_json(const std::filesystem::path& path);
Json parse_json(const std::string& text, const std::string& origin);
// Two-space indented with a trailing newline. Doubles round-trip exactly.
void write_json(const std::filesystem::path& path, const Json& value);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

ShapeParams shape_from_json(const Json& j, const std::string& where = "beta");
Json to_json(const ShapeParams& beta);

Skeleton skeleton_from_json(const Json& j);
Json to_json(const Skeleton& skel);
// "default" selects the built-in skeleton, anything else is a JSON file.
Skeleton load_skeleton(const std::string& ref);

struct MotionFile {
  Motion motion;
  ShapeParams beta;
  std::string skeleton_ref = "default";
  // Per-frame shape estimates; empty or one per frame.
  std::vector<ShapeParams> frame_betas;
};

MotionFile motion_from_json(const Json& j);
Json to_json(const MotionFile& file);
MotionFile load_motion(const std::filesystem::path& path);
void save_motion(const std::filesystem::path& path, const MotionFile& file);

// {fx, fy, cx, cy, width, height, pose?: {R: 3x3 rows, t: [3]}} with the
// pose mapping world to camera coordinates.
Camera camera_from_json(const Json& j);
Json to_json(const Camera& camera);

// [{frame, joint: index or name, kind: "p3d" | "p2d", target, label}]
std::vector<Constraint> constraints_from_json(const Json& j, const Skeleton& skel);
Json constraints_to_json(const std::vector<Constraint>& constraints, const Skeleton& skel);

// JSON integer matrix (rows of columns) or a single-channel PGM/PNG.
LabelImage load_label_image(const std::filesystem::path& path);

struct DeformOptions {
  ArapConfig arap;
  int contour_stride = 5;
};

struct EvalOptions {
  // Acceptance window override; the length-based rule applies when absent.
  std::optional<std::size_t> window;
  bool per_channel = false;
};

// Each section overrides only the keys it names; unknown keys are errors.
ReconstructConfig reconstruct_config_from_json(const Json& j, ReconstructConfig base = {});
Json to_json(const ReconstructConfig& c);
RetargetConfig retarget_config_from_json(const Json& j, RetargetConfig base = {});
Json to_json(const RetargetConfig& c);
DeformOptions deform_options_from_json(const Json& j, DeformOptions base = {});
Json to_json(const DeformOptions& c);
EvalOptions eval_options_from_json(const Json& j, EvalOptions base = {});
Json to_json(const EvalOptions& c);
ScenarioSpec scenario_from_json(const Json& j, ScenarioSpec base = {});
Json to_json(const ScenarioSpec& s);

// FNV-1a 64-bit digest of a file's bytes as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

} // namespace rtk
