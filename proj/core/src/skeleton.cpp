#include "rtk/skeleton.hpp"

#include "rtk/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace rtk {

namespace {

bool all_finite(const Vec3& v) {
  return v.allFinite();
}

} // namespace

void ShapeParams::validate(double bound) const {
  for (int i = 0; i < kShapeCount; ++i) {
    if (!std::isfinite(beta[i])) {
      throw InputError("shape coefficient beta[" + std::to_string(i) + "] is not finite");
    }
    if (std::abs(beta[i]) > bound) {
      std::ostringstream msg;
      msg << "shape coefficient beta[" << i << "] = " << beta[i] << " exceeds bound " << bound;
      throw InputError(msg.str());
    }
  }
}

Skeleton Skeleton::create(
    std::array<int, kJointCount> parents,
    BoneOffsets rest_offsets,
    ShapeBasis shape_basis,
    std::vector<int> end_effectors,
    std::vector<std::string> joint_names) {
  Skeleton s;
  int roots = 0;
  for (int j = 0; j < kJointCount; ++j) {
    const int p = parents[j];
    if (p == kNoParent) {
      ++roots;
      s.root_ = j;
    } else if (p < 0 || p >= kJointCount || p == j) {
      throw InputError("joint " + std::to_string(j) + " has invalid parent " + std::to_string(p));
    } else {
      s.children_[p].push_back(j);
    }
  }
  if (roots != 1) {
    throw InputError("skeleton must have exactly one root, found " + std::to_string(roots));
  }

  // Breadth-first from the root; anything unvisited sits on a cycle.
  std::deque<int> queue{s.root_};
  std::array<bool, kJointCount> seen{};
  seen[s.root_] = true;
  s.depth_[s.root_] = 0;
  int count = 0;
  while (!queue.empty()) {
    const int j = queue.front();
    queue.pop_front();
    s.order_[count++] = j;
    for (int c : s.children_[j]) {
      if (seen[c]) {
        throw InputError("skeleton parent array contains a cycle at joint " + std::to_string(c));
      }
      seen[c] = true;
      s.depth_[c] = s.depth_[j] + 1;
      queue.push_back(c);
    }
  }
  if (count != kJointCount) {
    throw InputError("skeleton parent array is not a tree: " + std::to_string(kJointCount - count) +
                     " joints unreachable from the root");
  }
  s.max_depth_ = *std::max_element(s.depth_.begin(), s.depth_.end());

  for (int j = 0; j < kJointCount; ++j) {
    if (!all_finite(rest_offsets[j])) {
      throw InputError("rest offset of joint " + std::to_string(j) + " is not finite");
    }
    for (int i = 0; i < kShapeCount; ++i) {
      if (!all_finite(shape_basis[i][j])) {
        throw InputError("shape basis entry is not finite");
      }
    }
  }
  std::sort(end_effectors.begin(), end_effectors.end());
  end_effectors.erase(std::unique(end_effectors.begin(), end_effectors.end()), end_effectors.end());
  for (int e : end_effectors) {
    if (e < 0 || e >= kJointCount) {
      throw InputError("end-effector id " + std::to_string(e) + " out of range");
    }
  }
  if (!joint_names.empty() && joint_names.size() != kJointCount) {
    throw InputError("joint_names must list 24 names");
  }

  s.parents_ = parents;
  s.rest_offsets_ = rest_offsets;
  s.shape_basis_ = shape_basis;
  s.end_effectors_ = std::move(end_effectors);
  s.joint_names_ = std::move(joint_names);
  // Degenerate rest bones are reported here rather than at first FK call.
  (void)bone_offsets(s, ShapeParams::zero());
  return s;
}

bool Skeleton::is_end_effector(int joint) const {
  return std::binary_search(end_effectors_.begin(), end_effectors_.end(), joint);
}

std::optional<int> Skeleton::find_joint(const std::string& name) const {
  for (std::size_t j = 0; j < joint_names_.size(); ++j) {
    if (joint_names_[j] == name) {
      return static_cast<int>(j);
    }
  }
  return std::nullopt;
}

std::string Skeleton::joint_label(int joint) const {
  if (joint >= 0 && joint < static_cast<int>(joint_names_.size())) {
    return joint_names_[joint];
  }
  return "joint" + std::to_string(joint);
}

void Pose::validate() const {
  for (int j = 0; j < kJointCount; ++j) {
    if (!all_finite(theta[j])) {
      throw InputError("pose angle of joint " + std::to_string(j) + " is not finite");
    }
  }
  if (!all_finite(root_t)) {
    throw InputError("pose root translation is not finite");
  }
}

bool Pose::operator==(const Pose& other) const {
  for (int j = 0; j < kJointCount; ++j) {
    if (theta[j] != other.theta[j]) {
      return false;
    }
  }
  return root_t == other.root_t;
}

void Motion::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw InputError("motion fps must be positive");
  }
  if (frames.empty()) {
    throw InputError("motion has no frames");
  }
  for (std::size_t k = 0; k < frames.size(); ++k) {
    try {
      frames[k].validate();
    } catch (const InputError& e) {
      throw InputError("frame " + std::to_string(k) + ": " + e.what());
    }
  }
}

BoneOffsets bone_offsets(const Skeleton& skel, const ShapeParams& beta) {
  BoneOffsets out = skel.rest_offsets();
  for (int i = 0; i < kShapeCount; ++i) {
    if (beta.beta[i] == 0.0) {
      continue;
    }
    const auto& dir = skel.shape_basis()[i];
    for (int j = 0; j < kJointCount; ++j) {
      out[j] += beta.beta[i] * dir[j];
    }
  }
  for (int j = 0; j < kJointCount; ++j) {
    if (j != skel.root() && out[j].norm() <= 0.0) {
      throw InputError("degenerate bone: joint '" + skel.joint_label(j) + "' has zero-length offset");
    }
  }
  return out;
}

JointPoses forward_kinematics(const Skeleton& skel, const BoneOffsets& offsets, const Pose& pose) {
  if (!pose.root_t.allFinite()) {
    throw InputError("forward kinematics: non-finite root translation");
  }
  JointPoses out;
  for (int j : skel.order()) {
    if (!pose.theta[j].allFinite()) {
      throw InputError("forward kinematics: non-finite angle at joint " + std::to_string(j));
    }
    const Mat3 local = exp_map(pose.theta[j]);
    const int p = skel.parent(j);
    if (p == kNoParent) {
      out[j].rotation = local;
      out[j].translation = pose.root_t;
    } else {
      out[j].rotation = out[p].rotation * local;
      out[j].translation = out[p].translation + out[p].rotation * offsets[j];
    }
  }
  return out;
}

JointPoses forward_kinematics(const Skeleton& skel, const ShapeParams& beta, const Pose& pose) {
  return forward_kinematics(skel, bone_offsets(skel, beta), pose);
}

JointPositions joint_positions(const JointPoses& poses) {
  JointPositions out;
  for (int j = 0; j < kJointCount; ++j) {
    out[j] = poses[j].translation;
  }
  return out;
}

std::vector<JointPositions> motion_positions(
    const Skeleton& skel,
    const ShapeParams& beta,
    const Motion& motion) {
  const BoneOffsets offsets = bone_offsets(skel, beta);
  std::vector<JointPositions> out;
  out.reserve(motion.size());
  for (const Pose& pose : motion.frames) {
    out.push_back(joint_positions(forward_kinematics(skel, offsets, pose)));
  }
  return out;
}

PoseGradient backpropagate_positions(
    const Skeleton& skel,
    const Pose& pose,
    const JointPoses& poses,
    std::span<const Vec3, kJointCount> grad_positions) {
  // Subtree sums of the position gradient and its moment about the origin;
  // the moment about joint j follows by shifting.
  std::array<Vec3, kJointCount> force;
  std::array<Vec3, kJointCount> moment;
  for (int j = 0; j < kJointCount; ++j) {
    force[j] = grad_positions[j];
    moment[j] = poses[j].translation.cross(grad_positions[j]);
  }
  const auto& order = skel.order();
  for (int idx = kJointCount - 1; idx > 0; --idx) {
    const int j = order[idx];
    const int p = skel.parent(j);
    force[p] += force[j];
    moment[p] += moment[j];
  }

  PoseGradient out;
  for (int j = 0; j < kJointCount; ++j) {
    const Vec3& pj = poses[j].translation;
    const Vec3 strict_force = force[j] - grad_positions[j];
    const Vec3 strict_moment = moment[j] - pj.cross(grad_positions[j]);
    const Vec3 torque = strict_moment - pj.cross(strict_force);
    const int p = skel.parent(j);
    const Vec3 local = p == kNoParent ? torque : Vec3(poses[p].rotation.transpose() * torque);
    out.theta[j] = left_jacobian(pose.theta[j]).transpose() * local;
  }
  out.root_t = force[skel.root()];
  return out;
}

Skeleton default_skeleton() {
  using namespace joints;
  const std::array<int, kJointCount> parents = {
      kNoParent, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

  BoneOffsets rest;
  rest[kPelvis] = Vec3(0.0, 0.0, 0.0);
  rest[kSpine1] = Vec3(0.0, 0.11, -0.02);
  rest[kSpine2] = Vec3(0.0, 0.135, 0.0);
  rest[kSpine3] = Vec3(0.0, 0.055, 0.025);
  rest[kNeck] = Vec3(0.0, 0.215, -0.04);
  rest[kHead] = Vec3(0.0, 0.085, 0.05);
  // Left side; the right side mirrors x.
  const auto mirror = [](const Vec3& v) { return Vec3(-v.x(), v.y(), v.z()); };
  const Vec3 hip(0.07, -0.09, 0.0);
  const Vec3 knee(0.035, -0.375, 0.0);
  const Vec3 ankle(-0.01, -0.40, -0.04);
  const Vec3 foot(0.025, -0.055, 0.125);
  const Vec3 collar(0.08, 0.125, -0.03);
  const Vec3 shoulder(0.09, 0.03, -0.01);
  const Vec3 elbow(0.25, -0.01, -0.02);
  const Vec3 wrist(0.255, 0.0, 0.0);
  const Vec3 hand(0.08, -0.01, -0.01);
  rest[kLeftHip] = hip;
  rest[kRightHip] = mirror(hip);
  rest[kLeftKnee] = knee;
  rest[kRightKnee] = mirror(knee);
  rest[kLeftAnkle] = ankle;
  rest[kRightAnkle] = mirror(ankle);
  rest[kLeftFoot] = foot;
  rest[kRightFoot] = mirror(foot);
  rest[kLeftCollar] = collar;
  rest[kRightCollar] = mirror(collar);
  rest[kLeftShoulder] = shoulder;
  rest[kRightShoulder] = mirror(shoulder);
  rest[kLeftElbow] = elbow;
  rest[kRightElbow] = mirror(elbow);
  rest[kLeftWrist] = wrist;
  rest[kRightWrist] = mirror(wrist);
  rest[kLeftHand] = hand;
  rest[kRightHand] = mirror(hand);

  ShapeBasis basis;
  for (auto& dir : basis) {
    dir.fill(Vec3::Zero());
  }
  const auto scale = [&](int b, std::initializer_list<int> js, double s) {
    for (int j : js) {
      basis[b][j] += s * rest[j];
    }
  };
  const auto widen = [&](int b, std::initializer_list<int> js, double s) {
    for (int j : js) {
      basis[b][j] += Vec3(s * rest[j].x(), 0.0, 0.0);
    }
  };
  for (int j = 1; j < kJointCount; ++j) {
    basis[0][j] = 0.1 * rest[j];
  }
  scale(1, {kLeftKnee, kRightKnee, kLeftAnkle, kRightAnkle, kLeftFoot, kRightFoot}, 0.05);
  scale(2, {kLeftElbow, kRightElbow, kLeftWrist, kRightWrist, kLeftHand, kRightHand}, 0.05);
  scale(3, {kSpine1, kSpine2, kSpine3, kNeck, kHead}, 0.05);
  widen(4, {kLeftHip, kRightHip, kLeftCollar, kRightCollar, kLeftShoulder, kRightShoulder}, 0.05);
  scale(5, {kNeck, kHead}, 0.05);
  scale(6, {kLeftFoot, kRightFoot, kLeftHand, kRightHand}, 0.05);
  widen(7, {kLeftCollar, kRightCollar, kLeftShoulder, kRightShoulder}, 0.05);
  widen(8, {kLeftHip, kRightHip}, 0.05);
  scale(9, {kLeftWrist, kRightWrist}, 0.05);
  scale(9, {kLeftElbow, kRightElbow}, -0.05);

  std::vector<std::string> names = {
      "pelvis",         "left_hip",      "right_hip",      "spine1",      "left_knee",
      "right_knee",     "spine2",        "left_ankle",     "right_ankle", "spine3",
      "left_foot",      "right_foot",    "neck",           "left_collar", "right_collar",
      "head",           "left_shoulder", "right_shoulder", "left_elbow",  "right_elbow",
      "left_wrist",     "right_wrist",   "left_hand",      "right_hand"};
  return Skeleton::create(
      parents, rest, basis, {kLeftFoot, kRightFoot, kLeftHand, kRightHand}, std::move(names));
}

} // namespace rtk
