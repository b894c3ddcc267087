#pragma once

#include "rtk/adam.hpp"
#include "rtk/camera.hpp"
#include "rtk/skeleton.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace rtk {

enum class ConstraintKind { Position3D, Pixel2D };

// End-effector target at one frame: a world point (Position3D) or an image
// pixel under the constraint set's camera (Pixel2D).
struct Constraint {
  std::size_t frame = 0;
  int joint = 0;
  ConstraintKind kind = ConstraintKind::Position3D;
  Vec3 position = Vec3::Zero();
  Vec2 pixel = Vec2::Zero();
  std::string label;
};

struct ConstraintSet {
  std::vector<Constraint> constraints;
  std::optional<Camera> camera;

  bool has_pixel_constraints() const;
  // Throws InputError for out-of-range frames, joints that are not declared
  // end-effectors, non-finite targets, or 2D constraints without a camera.
  void validate(const Skeleton& skel, std::size_t frame_count) const;
};

// Diagonal of the offset penalty, one weight per joint.
struct JointWeights {
  std::array<double, kJointCount> w{};

  // w_j = 1 + (D - depth_j) / D with D the deepest level: 2 at the root, 1 at
  // the deepest leaves.
  static JointWeights from_depth(const Skeleton& skel);
  void validate(const Skeleton& skel) const;
};

struct RetargetConfig {
  double lambda1 = 5.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double window_seconds = 2.0;
  int iterations = 300;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.99;
  // Adds an unpenalized per-frame root translation offset to the variables.
  bool optimize_root_translation = false;
  // Start Adam from constraint_warm_start instead of zero offsets.
  bool warm_start = true;
  std::optional<JointWeights> weights;

  void validate() const;
  AdamOptions optimizer() const;
  std::size_t window_frames(double fps) const;
};

using AngleOffsets = std::array<Vec3, kJointCount>;

// Optimization variables over one window.
struct OffsetSequence {
  std::vector<AngleOffsets> e;
  // Empty unless root translation is optimized.
  std::vector<Vec3> root_offsets;
  std::vector<double> loss_trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;

  static OffsetSequence zeros(std::size_t frames, bool with_root);
  std::size_t size() const {
    return e.size();
  }
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& x);
};

Pose apply_offsets(const Pose& source, const AngleOffsets& e, const Vec3& root_offset = Vec3::Zero());

// FK(beta, theta_{k+1}) - FK(beta, theta_k) on joint positions.
std::array<Vec3, kJointCount> motion_delta(
    const Skeleton& skel,
    const ShapeParams& beta,
    const Pose& current,
    const Pose& next);

// Sum over in-window consecutive pairs of the L1 difference between target
// and source joint velocities.
double loss_style(
    const Skeleton& skel,
    const ShapeParams& beta_target,
    const ShapeParams& beta_source,
    const std::vector<Pose>& source_window,
    const std::vector<AngleOffsets>& e);

// L1 distance of constrained joints to their 3D targets at one frame. Only
// Position3D entries of `constraints` are used.
double loss_3d(
    const Skeleton& skel,
    const ShapeParams& beta_target,
    const Pose& source,
    const AngleOffsets& e,
    const std::vector<Constraint>& constraints);

// L1 pixel distance of projected constrained joints to their 2D targets.
double loss_2d(
    const Skeleton& skel,
    const ShapeParams& beta_target,
    const Pose& source,
    const AngleOffsets& e,
    const std::vector<Constraint>& constraints,
    const Camera& camera);

struct LossBreakdown {
  double offset_norm = 0.0;
  double style = 0.0;
  double position3d = 0.0;
  double pixel2d = 0.0;
  double total = 0.0;
};

// Full window objective
//   ||W1 e||_2 + lambda1 L_style + lambda2 L_3d + lambda3 L_2d
// with its exact gradient. Constraint frames are window-relative.
class RetargetObjective {
 public:
  RetargetObjective(
      const Skeleton& skel,
      const ShapeParams& beta_source,
      const ShapeParams& beta_target,
      std::vector<Pose> source_window,
      std::vector<Constraint> constraints,
      std::optional<Camera> camera,
      JointWeights weights,
      const RetargetConfig& config);

  std::size_t frames() const {
    return source_.size();
  }
  bool with_root() const {
    return with_root_;
  }
  Eigen::Index dimension() const;

  // Subgradient convention: sign(0) = 0 for L1 terms and 0 for the offset
  // norm at e = 0. `grad` may be null.
  LossBreakdown evaluate(const OffsetSequence& x, Eigen::VectorXd* grad = nullptr) const;
  LossBreakdown evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr) const;

 private:
  const Skeleton* skel_;
  BoneOffsets target_offsets_;
  std::vector<Pose> source_;
  std::vector<std::array<Vec3, kJointCount>> source_deltas_;
  std::vector<std::vector<Constraint>> per_frame_;
  std::optional<Camera> camera_;
  JointWeights weights_;
  double lambda1_;
  double lambda2_;
  double lambda3_;
  bool with_root_;
};

double total_loss(const RetargetObjective& objective, const OffsetSequence& x);
Eigen::VectorXd loss_gradient(const RetargetObjective& objective, const OffsetSequence& x);

struct FrameOffsets {
  AngleOffsets e;
  Vec3 root = Vec3::Zero();
};

// Gauss-Newton solve of a smooth stand-in for the window objective: squared
// velocity-style residuals plus heavily weighted squared constraint residuals
// and a small pull of e toward zero. Used to start Adam near a
// constraint-satisfying, temporally coherent solution. `pinned_first` holds
// the first frame fixed (window overlap). Frames are window-relative.
OffsetSequence constraint_warm_start(
    const Skeleton& skel,
    const ShapeParams& beta_source,
    const ShapeParams& beta_target,
    const std::vector<Pose>& source_window,
    const std::vector<Constraint>& constraints,
    const std::optional<Camera>& camera,
    const JointWeights& weights,
    const RetargetConfig& config,
    const FrameOffsets* pinned_first = nullptr);

// Runs Adam from `init` (zeros when null) and returns the lowest-loss iterate
// with its loss trace. Constraint frames are window-relative. With
// freeze_first the first frame keeps its initial offsets.
OffsetSequence retarget_window(
    const Skeleton& skel,
    const ShapeParams& beta_source,
    const ShapeParams& beta_target,
    const std::vector<Pose>& source_window,
    const std::vector<Constraint>& constraints,
    const std::optional<Camera>& camera,
    const JointWeights& weights,
    const RetargetConfig& config,
    const OffsetSequence* init = nullptr,
    bool freeze_first = false);

struct WindowRange {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
};

// Consecutive windows of `window` frames sharing one overlap frame. A final
// window shorter than half the window length is merged into its predecessor.
std::vector<WindowRange> window_ranges(std::size_t frame_count, std::size_t window);

struct WindowReport {
  WindowRange range;
  std::vector<double> loss_trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct RetargetResult {
  Motion motion;
  std::vector<AngleOffsets> e;
  std::vector<Vec3> root_offsets;
  std::vector<WindowReport> windows;
};

// Slides windows over the motion; each window after the first warm-starts its
// overlap frame from the previous solution, which also wins for output.
RetargetResult retarget_motion(
    const Skeleton& skel,
    const Motion& source,
    const ShapeParams& beta_source,
    const ShapeParams& beta_target,
    const ConstraintSet& constraints,
    const RetargetConfig& config);

// Source angles and root translation on the target shape (e = 0).
Motion direct_transfer(const Motion& source);

struct ConstraintResidual {
  std::size_t frame;
  int joint;
  ConstraintKind kind;
  // Euclidean distance: meters for 3D, pixels for 2D.
  double residual;
};

std::vector<ConstraintResidual> constraint_residuals(
    const Skeleton& skel,
    const ShapeParams& beta,
    const Motion& motion,
    const ConstraintSet& constraints);

} // namespace rtk
