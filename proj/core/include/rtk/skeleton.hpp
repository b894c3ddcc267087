#pragma once

#include "rtk/rotation.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rtk {

inline constexpr int kJointCount = 24;
inline constexpr int kShapeCount = 10;
inline constexpr int kNoParent = -1;
inline constexpr double kDefaultBetaBound = 5.0;

using BoneOffsets = std::array<Vec3, kJointCount>;
using JointPositions = std::array<Vec3, kJointCount>;
using ShapeBasis = std::array<BoneOffsets, kShapeCount>;

struct ShapeParams {
  std::array<double, kShapeCount> beta{};

  static ShapeParams zero() {
    return {};
  }
  // Throws InputError if any coefficient is non-finite or exceeds `bound`.
  void validate(double bound = kDefaultBetaBound) const;

  bool operator==(const ShapeParams&) const = default;
};

// 24-joint tree with a linear bone-offset shape space.
//
// Offsets are expressed in the parent's frame: the child of joint p sits at
// p's world transform applied to the child's offset. The root's own offset is
// carried for completeness but FK places the root at the pose's root_t.
class Skeleton {
 public:
  static Skeleton create(
      std::array<int, kJointCount> parents,
      BoneOffsets rest_offsets,
      ShapeBasis shape_basis,
      std::vector<int> end_effectors,
      std::vector<std::string> joint_names = {});

  const std::array<int, kJointCount>& parents() const {
    return parents_;
  }
  int parent(int joint) const {
    return parents_[joint];
  }
  int root() const {
    return root_;
  }
  const BoneOffsets& rest_offsets() const {
    return rest_offsets_;
  }
  const ShapeBasis& shape_basis() const {
    return shape_basis_;
  }
  const std::vector<int>& end_effectors() const {
    return end_effectors_;
  }
  const std::vector<std::string>& joint_names() const {
    return joint_names_;
  }
  const std::vector<int>& children(int joint) const {
    return children_[joint];
  }
  // Parents always precede children in this order; order()[0] is the root.
  const std::array<int, kJointCount>& order() const {
    return order_;
  }
  int depth(int joint) const {
    return depth_[joint];
  }
  int max_depth() const {
    return max_depth_;
  }

  bool is_end_effector(int joint) const;
  std::optional<int> find_joint(const std::string& name) const;
  // Name if present, otherwise "joint<N>".
  std::string joint_label(int joint) const;

 private:
  Skeleton() = default;

  std::array<int, kJointCount> parents_{};
  BoneOffsets rest_offsets_{};
  ShapeBasis shape_basis_{};
  std::vector<int> end_effectors_;
  std::vector<std::string> joint_names_;
  std::array<std::vector<int>, kJointCount> children_;
  std::array<int, kJointCount> order_{};
  std::array<int, kJointCount> depth_{};
  int root_ = 0;
  int max_depth_ = 0;
};

// Joint rotations as axis-angle vectors (72 reals) plus the root translation.
struct Pose {
  std::array<Vec3, kJointCount> theta;
  Vec3 root_t = Vec3::Zero();

  Pose() {
    theta.fill(Vec3::Zero());
  }
  void validate() const;
  bool operator==(const Pose& other) const;
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const {
    return rotation * p + translation;
  }
};

using JointPoses = std::array<RigidTransform, kJointCount>;

struct Motion {
  double fps = 30.0;
  std::vector<Pose> frames;

  std::size_t size() const {
    return frames.size();
  }
  void validate() const;
};

// offset_j = rest_j + sum_i beta_i * basis[i][j]. Throws InputError naming the
// joint when a non-root bone collapses to zero length.
BoneOffsets bone_offsets(const Skeleton& skel, const ShapeParams& beta);

JointPoses forward_kinematics(const Skeleton& skel, const ShapeParams& beta, const Pose& pose);
JointPoses forward_kinematics(const Skeleton& skel, const BoneOffsets& offsets, const Pose& pose);

JointPositions joint_positions(const JointPoses& poses);

// FK positions for every frame of a motion.
std::vector<JointPositions> motion_positions(
    const Skeleton& skel,
    const ShapeParams& beta,
    const Motion& motion);

struct PoseGradient {
  std::array<Vec3, kJointCount> theta;
  Vec3 root_t = Vec3::Zero();
};

// Vector-Jacobian product of joint_positions(FK(pose)) with respect to the
// pose, given dL/dposition for each joint. `poses` must be FK of `pose`.
PoseGradient backpropagate_positions(
    const Skeleton& skel,
    const Pose& pose,
    const JointPoses& poses,
    std::span<const Vec3, kJointCount> grad_positions);

// SMPL-style joint layout with hand-tuned offsets (meters, y up, facing +z)
// and a ten-direction proportion basis: 0 uniform scale, 1 legs, 2 arms,
// 3 torso, 4 body width, 5 head and neck, 6 hands and feet, 7 shoulder width,
// 8 hip width, 9 forearm versus upper arm.
Skeleton default_skeleton();

namespace joints {
inline constexpr int kPelvis = 0;
inline constexpr int kLeftHip = 1;
inline constexpr int kRightHip = 2;
inline constexpr int kSpine1 = 3;
inline constexpr int kLeftKnee = 4;
inline constexpr int kRightKnee = 5;
inline constexpr int kSpine2 = 6;
inline constexpr int kLeftAnkle = 7;
inline constexpr int kRightAnkle = 8;
inline constexpr int kSpine3 = 9;
inline constexpr int kLeftFoot = 10;
inline constexpr int kRightFoot = 11;
inline constexpr int kNeck = 12;
inline constexpr int kLeftCollar = 13;
inline constexpr int kRightCollar = 14;
inline constexpr int kHead = 15;
inline constexpr int kLeftShoulder = 16;
inline constexpr int kRightShoulder = 17;
inline constexpr int kLeftElbow = 18;
inline constexpr int kRightElbow = 19;
inline constexpr int kLeftWrist = 20;
inline constexpr int kRightWrist = 21;
inline constexpr int kLeftHand = 22;
inline constexpr int kRightHand = 23;
} // namespace joints

} // namespace rtk
