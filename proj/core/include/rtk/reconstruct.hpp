#pragma once

#include "rtk/adam.hpp"
#include "rtk/skeleton.hpp"
#include "rtk/spline.hpp"

#include <span>
#include <vector>

namespace rtk {

// Per-frame, per-joint inlier flags over joint positions.
class InlierMask {
 public:
  InlierMask() = default;
  explicit InlierMask(std::size_t frames);

  std::size_t frame_count() const {
    return rows_.size();
  }
  bool inlier(std::size_t frame, int joint) const {
    return rows_[frame][joint];
  }
  void set(std::size_t frame, int joint, bool inlier) {
    rows_[frame][joint] = inlier;
  }
  const std::array<bool, kJointCount>& row(std::size_t frame) const {
    return rows_[frame];
  }
  std::size_t outlier_count() const;

  bool operator==(const InlierMask&) const = default;

 private:
  std::vector<std::array<bool, kJointCount>> rows_;
};

struct SplineConfig {
  // Frequency at which the smoother's gain drops to one half.
  double cutoff_hz = 5.0;
  // Overrides cutoff_hz when >= 0.
  double lambda = -1.0;

  double resolve_lambda(double fps) const;
};

struct OutlierConfig {
  double k = 3.0;
  // Thresholds never drop below this residual (meters).
  double floor = 0.005;
  int max_rounds = 10;
};

struct RegularizeConfig {
  double gamma = 10.0;
  AdamOptions optimizer{.learning_rate = 0.01, .beta1 = 0.9, .beta2 = 0.99, .iterations = 300, .monotone = true};
};

struct ReconstructConfig {
  SplineConfig spline;
  OutlierConfig outliers;
  RegularizeConfig regularize;
};

// Componentwise mean. Throws InputError on empty input.
ShapeParams average_shape(std::span<const ShapeParams> betas);

// Smoothing spline per joint coordinate over joint positions (knots at frame
// indices). Entries flagged in `mask` get zero weight. Needs >= 4 frames.
SplineTrack fit_spline(
    const std::vector<JointPositions>& positions,
    double fps,
    const SplineConfig& config,
    const InlierMask* mask = nullptr);
SplineTrack fit_spline(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const SplineConfig& config,
    const InlierMask* mask = nullptr);

// Position residual of every joint at every frame against the spline.
std::vector<std::array<double, kJointCount>> spline_residuals(
    const std::vector<JointPositions>& positions,
    const SplineTrack& spline);

// Flags entry (k, j) when its residual exceeds
//   max(median_j + k * 1.4826 * MAD_j, floor)
// with statistics taken per joint over entries that are inliers in `prior`
// (all entries when prior is null).
InlierMask detect_outliers(
    const std::vector<JointPositions>& positions,
    const SplineTrack& spline,
    const OutlierConfig& config,
    const InlierMask* prior = nullptr);
InlierMask detect_outliers(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const SplineTrack& spline,
    const OutlierConfig& config);

struct RobustSpline {
  SplineTrack spline;
  InlierMask mask;
  int rounds = 0;
};

// Alternates fit_spline and detect_outliers, refitting without the flagged
// samples, until the mask stops changing or max_rounds is reached.
RobustSpline fit_spline_robust(
    const std::vector<JointPositions>& positions,
    double fps,
    const SplineConfig& spline_config,
    const OutlierConfig& outlier_config);

// Joint angle j is anchored to its original value unless one of j's children
// (whose positions it drives) is flagged.
std::array<bool, kJointCount> anchored_angles(const Skeleton& skel, const std::array<bool, kJointCount>& mask_row);

// ||theta_hat - theta||_2 over anchored angles + gamma * ||FK(theta_hat) - target||_2.
// Fills `grad` (72 entries, joint-major) when non-null.
double regularization_cost(
    const Skeleton& skel,
    const BoneOffsets& offsets,
    const Pose& estimate,
    const Pose& original,
    const std::array<bool, kJointCount>& anchored,
    const JointPositions& target,
    double gamma,
    Eigen::VectorXd* grad = nullptr);

struct RegularizeResult {
  Motion motion;
  std::vector<double> cost_before;
  std::vector<double> cost_after;
};

// Per-frame minimization of the regularization cost with Adam plus a
// step-halving guard, starting from the original angles. Root translation is
// kept. Throws NumericalError naming the frame on divergence.
RegularizeResult regularize_motion(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const SplineTrack& spline,
    const InlierMask& mask,
    const RegularizeConfig& config);

Motion regularize_motion(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const SplineTrack& spline,
    const InlierMask& mask,
    double gamma);

struct OutlierEntry {
  std::size_t frame;
  int joint;
  double residual;
};

struct ReconstructResult {
  Motion motion;
  ShapeParams beta;
  SplineTrack spline;
  InlierMask mask;
  std::vector<OutlierEntry> outliers;
  int robust_rounds = 0;
  double cost_before = 0.0;
  double cost_after = 0.0;
  // RMS joint displacement between input and output divided by the RMS
  // root-relative joint spread of the input.
  double relative_motion_change = 0.0;
};

// average_shape -> fit_spline -> detect_outliers (robust refit) -> regularize.
// `frame_betas` may be empty, in which case `fallback_beta` is used.
ReconstructResult reconstruct_motion(
    const Motion& motion,
    const Skeleton& skel,
    std::span<const ShapeParams> frame_betas,
    const ShapeParams& fallback_beta,
    const ReconstructConfig& config);

} // namespace rtk
