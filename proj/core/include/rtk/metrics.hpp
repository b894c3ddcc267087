#pragma once

#include "rtk/image.hpp"
#include "rtk/retarget.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rtk {

// Half-width of the frame matching band: max(15, 2 |len1 - len2|).
std::size_t acceptance_window(std::size_t len1, std::size_t len2);

// Mean squared intensity difference over all pixels and channels.
double mse(const Frame& a, const Frame& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// Gaussian-windowed SSIM averaged over all window positions fully inside the
// frame. RGB frames are compared on luma unless `per_channel` is set, in
// which case the three channel scores are averaged.
double ssim(const Frame& a, const Frame& b, bool per_channel = false);

enum class FrameMetric { Mse, Ssim };

// Lower is better for MSE, higher for SSIM.
bool metric_prefers_lower(FrameMetric metric);

// For each k in [0, len_a), the best score(k, j) over j in [k - w, k + w]
// clamped to [0, len_b). When the band falls past the end of b, the last
// frame of b is used.
std::vector<double> windowed_score(
    std::size_t len_a,
    std::size_t len_b,
    std::size_t w,
    bool lower_is_better,
    const std::function<double(std::size_t, std::size_t)>& score);

std::vector<double> windowed_score(
    std::span<const Frame> a,
    std::span<const Frame> b,
    FrameMetric metric,
    std::size_t w,
    bool per_channel = false);

struct EndEffectorEntry {
  std::size_t frame;
  int joint;
  ConstraintKind kind;
  std::string label;
  double pixels;
};

// Pixel distance between each projected constrained joint and its target
// (3D targets projected with the constraint set's camera).
std::vector<EndEffectorEntry> end_effector_errors(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const ConstraintSet& constraints);

// Mean of end_effector_errors; 0 when there are no constraints.
double end_effector_error(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const ConstraintSet& constraints);

struct EvalFrameScore {
  std::size_t index = 0;
  std::optional<double> mse;
  std::optional<double> ssim;
};

struct EvalReport {
  std::size_t window = 0;
  std::vector<EvalFrameScore> frames;
  std::vector<EndEffectorEntry> end_effector;
  std::map<std::string, std::string> metadata;
  // Filled by external tools; never computed here.
  std::optional<double> lpips;
  std::optional<double> fvd;
  std::optional<double> forgery;

  std::optional<double> mean_mse() const;
  std::optional<double> mean_ssim() const;
  std::optional<double> mean_end_effector_error() const;

  nlohmann::json to_json() const;
  // One row per frame: index,mse,ssim (empty cells for missing scores).
  std::string frames_csv() const;
};

} // namespace rtk
