#include "rtk/synth.hpp"

#include "rtk/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace rtk {

namespace {

using namespace joints;
constexpr double kPi = std::numbers::pi;

// C2 ease from 0 to 1 over [a, b].
double ease(double x, double a, double b) {
  const double u = std::clamp((x - a) / (b - a), 0.0, 1.0);
  return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

Mat3 yaw(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
}

Mat3 roll(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

// Orthonormal frame with first axis along `dir` and second axis in the
// plane of `dir` and `normal`.
Mat3 frame_from(const Vec3& dir, const Vec3& normal) {
  const Vec3 e1 = dir.normalized();
  Vec3 n = normal - normal.dot(e1) * e1;
  const Vec3 e2 = n.norm() > 1e-9 ? n.normalized() : e1.unitOrthogonal();
  Mat3 f;
  f << e1, e2, e1.cross(e2);
  return f;
}

struct Limb {
  int base;
  int mid;
  int end;
  int tip;
  Vec3 rest_normal;
};

const std::array<Limb, 4> kLimbs = {{
    {kLeftHip, kLeftKnee, kLeftAnkle, kLeftFoot, Vec3::UnitZ()},
    {kRightHip, kRightKnee, kRightAnkle, kRightFoot, Vec3::UnitZ()},
    {kLeftShoulder, kLeftElbow, kLeftWrist, kLeftHand, -Vec3::UnitZ()},
    {kRightShoulder, kRightElbow, kRightWrist, kRightHand, -Vec3::UnitZ()},
}};
enum LimbId { kLeftLeg = 0, kRightLeg = 1, kLeftArm = 2, kRightArm = 3 };

// blend = 1 places the limb tip at `world`; blend = 0 places the limb's end
// joint at base + `relative`. Intermediate values interpolate the end joint.
struct LimbGoal {
  Vec3 world = Vec3::Zero();
  Vec3 relative = Vec3::Zero();
  double blend = 1.0;
  Mat3 end_rotation = Mat3::Identity();
  Vec3 pole = Vec3::UnitZ();
};

struct Contact {
  bool active = false;
  ConstraintKind kind = ConstraintKind::Position3D;
  std::string label;
};

struct FrameScript {
  Vec3 root = Vec3::Zero();
  Mat3 root_rotation = Mat3::Identity();
  std::array<Vec3, kJointCount> local;
  std::array<LimbGoal, 4> limbs;
  std::array<Contact, 4> contacts;

  FrameScript() {
    local.fill(Vec3::Zero());
  }
};

struct Body {
  BoneOffsets off;
  double leg = 0.0;
  double arm = 0.0;
  double stand_height = 0.0;

  explicit Body(const BoneOffsets& offsets) : off(offsets) {
    leg = off[kLeftKnee].norm() + off[kLeftAnkle].norm();
    arm = off[kLeftElbow].norm() + off[kLeftWrist].norm();
    // Feet flat on the floor with the hip-to-ankle span at 93% of the leg.
    stand_height = -off[kLeftFoot].y() + 0.93 * leg - off[kLeftHip].y();
  }
};

struct ScriptContext {
  const Body& body;
  double duration;
};

using Script = std::function<FrameScript(const ScriptContext&, double)>;

void set_leg(FrameScript& s, int limb, const Vec3& foot, const Mat3& facing) {
  s.limbs[limb].world = foot;
  s.limbs[limb].blend = 1.0;
  s.limbs[limb].end_rotation = facing;
  s.limbs[limb].pole = facing * Vec3::UnitZ();
}

// Arm hanging from the shoulder, swung forward by `swing` radians.
void set_arm(FrameScript& s, int limb, const Body& b, const Mat3& facing, double swing) {
  const double side = limb == kLeftArm ? 1.0 : -1.0;
  LimbGoal& g = s.limbs[limb];
  g.relative = facing * Vec3(side * 0.05 * b.arm, -0.88 * b.arm * std::cos(swing), 0.88 * b.arm * std::sin(swing));
  g.blend = 0.0;
  g.end_rotation = facing * roll(-side * kPi / 2.0);
  g.pole = facing * Vec3(0.0, -0.3, -1.0);
}

void set_contact(FrameScript& s, int limb, ConstraintKind kind, const std::string& label) {
  s.contacts[limb] = {true, kind, label};
}

constexpr double kGaitHz = 0.7;
constexpr double kStride = 0.5;
constexpr double kStepLift = 0.08;
constexpr double kStance = 0.6;
constexpr double kFootLateral = 0.12;

FrameScript walk(const ScriptContext& ctx, double t) {
  FrameScript s;
  const Mat3 facing = yaw(kPi / 2.0);
  const Vec3 fwd = facing * Vec3::UnitZ();
  const Vec3 left = facing * Vec3::UnitX();
  const double phase = kGaitHz * t;
  const double start = -kStride * (kGaitHz * ctx.duration / 2.0 - 0.25);
  s.root_rotation = facing;
  // Keeps the pelvis centered over the stance ankle, which trails the
  // footprint (the foot joint) by the foot length.
  const double lead = -ctx.body.off[kLeftFoot].z() - 0.1 * kStride;
  s.root = fwd * (start + kStride * (phase - 0.25) + lead) + Vec3::UnitY() * ctx.body.stand_height;

  for (int limb : {kLeftLeg, kRightLeg}) {
    const double side = limb == kLeftLeg ? 1.0 : -1.0;
    const double p = limb == kLeftLeg ? phase : phase - 0.5;
    const double step = std::floor(p);
    const double u = p - step;
    const double print = start + kStride * (step + (limb == kLeftLeg ? 0.0 : 0.5));
    Vec3 foot = left * (side * kFootLateral) + fwd * print;
    if (u < kStance) {
      set_contact(s, limb, ConstraintKind::Position3D, limb == kLeftLeg ? "left_foot_stance" : "right_foot_stance");
    } else {
      const double q = (u - kStance) / (1.0 - kStance);
      const double lift = std::sin(kPi * q);
      foot += fwd * (kStride * ease(q, 0.0, 1.0)) + Vec3::UnitY() * (kStepLift * lift * lift);
    }
    set_leg(s, limb, foot, facing);
  }
  const double swing = 0.35 * std::cos(2.0 * kPi * phase);
  set_arm(s, kLeftArm, ctx.body, facing, -swing);
  set_arm(s, kRightArm, ctx.body, facing, swing);
  return s;
}

FrameScript jump(const ScriptContext& ctx, double t) {
  FrameScript s;
  const Mat3 facing = Mat3::Identity();
  const double x = t / ctx.duration;
  constexpr double kHeight = 0.18;
  constexpr double kDistance = 0.3;
  const double crouch_in = std::sin(kPi * std::clamp((x - 0.15) / 0.2, 0.0, 1.0));
  const double crouch_out = std::sin(kPi * std::clamp((x - 0.62) / 0.2, 0.0, 1.0));
  const double drop = 0.12 * ctx.body.leg * (crouch_in * crouch_in + crouch_out * crouch_out);
  const double q = std::clamp((x - 0.4) / 0.2, 0.0, 1.0);
  const double rise = kHeight * 4.0 * q * (1.0 - q);
  const double advance = kDistance * ease(q, 0.0, 1.0);
  s.root = Vec3(0.0, ctx.body.stand_height - drop + rise, advance);
  const bool grounded = x < 0.4 || x > 0.6;
  for (int limb : {kLeftLeg, kRightLeg}) {
    const double side = limb == kLeftLeg ? 1.0 : -1.0;
    set_leg(s, limb, Vec3(side * 0.11, rise, 0.10 + advance), facing);
    if (grounded) {
      set_contact(s, limb, ConstraintKind::Position3D, limb == kLeftLeg ? "left_foot_ground" : "right_foot_ground");
    }
  }
  const double arms = std::sin(kPi * q);
  set_arm(s, kLeftArm, ctx.body, facing, 1.0 * arms * arms - 0.3 * crouch_in * crouch_in);
  set_arm(s, kRightArm, ctx.body, facing, 1.0 * arms * arms - 0.3 * crouch_in * crouch_in);
  return s;
}

void stand(FrameScript& s, const Body& body) {
  s.root = Vec3(0.0, body.stand_height, 0.0);
  set_leg(s, kLeftLeg, Vec3(0.11, 0.0, 0.10), Mat3::Identity());
  set_leg(s, kRightLeg, Vec3(-0.11, 0.0, 0.10), Mat3::Identity());
  set_contact(s, kLeftLeg, ConstraintKind::Position3D, "left_foot_planted");
  set_contact(s, kRightLeg, ConstraintKind::Position3D, "right_foot_planted");
  set_arm(s, kLeftArm, body, Mat3::Identity(), 0.0);
  set_arm(s, kRightArm, body, Mat3::Identity(), 0.0);
}

FrameScript pickup_box(const ScriptContext& ctx, double t) {
  FrameScript s;
  stand(s, ctx.body);
  const double x = t / ctx.duration;
  const double reach = ease(x, 0.2, 0.35) - ease(x, 0.8, 0.95);
  const double lift = ease(x, 0.45, 0.55) - ease(x, 0.65, 0.75);
  const double box_y = 1.08 + 0.14 * lift;
  const bool grasp = x >= 0.35 && x <= 0.8;
  for (int limb : {kLeftArm, kRightArm}) {
    const double side = limb == kLeftArm ? 1.0 : -1.0;
    s.limbs[limb].world = Vec3(side * 0.15, box_y, 0.22);
    s.limbs[limb].blend = reach;
    if (grasp) {
      set_contact(s, limb, ConstraintKind::Position3D, "box_grasp");
    }
  }
  return s;
}

FrameScript touch_cone(const ScriptContext& ctx, double t) {
  FrameScript s;
  stand(s, ctx.body);
  const double x = t / ctx.duration;
  s.limbs[kLeftArm].world = Vec3(0.40, 1.08, 0.15);
  s.limbs[kLeftArm].blend = ease(x, 0.2, 0.35) - ease(x, 0.7, 0.85);
  if (x >= 0.35 && x <= 0.7) {
    set_contact(s, kLeftArm, ConstraintKind::Pixel2D, "cone_touch");
  }
  return s;
}

Script find_script(const std::string& name) {
  if (name == "walk") {
    return walk;
  }
  if (name == "jump") {
    return jump;
  }
  if (name == "pickup-box") {
    return pickup_box;
  }
  if (name == "touch-cone") {
    return touch_cone;
  }
  throw InputError("unknown motion template '" + name + "'");
}

// Two-bone IK for every limb on top of the scripted torso.
Pose build_pose(const Skeleton& skel, const BoneOffsets& off, const FrameScript& s, std::size_t frame) {
  Pose pose;
  pose.theta = s.local;
  pose.theta[kPelvis] = log_map(s.root_rotation);
  pose.root_t = s.root;
  for (const Limb& l : kLimbs) {
    pose.theta[l.base] = pose.theta[l.mid] = pose.theta[l.end] = pose.theta[l.tip] = Vec3::Zero();
  }
  const JointPoses torso = forward_kinematics(skel, off, pose);
  for (std::size_t i = 0; i < kLimbs.size(); ++i) {
    const Limb& l = kLimbs[i];
    const LimbGoal& g = s.limbs[i];
    const Mat3& parent_rot = torso[skel.parent(l.base)].rotation;
    const Vec3 base = torso[l.base].translation;
    const double a = off[l.mid].norm();
    const double b = off[l.end].norm();
    const Vec3 end = g.blend * (g.world - g.end_rotation * off[l.tip]) + (1.0 - g.blend) * (base + g.relative);
    const double d = (end - base).norm();
    if (d > (a + b) * (1.0 - 1e-4) || d < std::abs(a - b) * (1.0 + 1e-4) + 1e-9) {
      throw InputError("scripted target for " + skel.joint_label(l.tip) + " is out of reach at frame " +
                       std::to_string(frame));
    }
    const double cos_a = std::clamp((a * a + d * d - b * b) / (2.0 * a * d), -1.0, 1.0);
    const Vec3 u = (end - base) / d;
    const Vec3 v = frame_from(u, g.pole).col(1);
    const Vec3 knee = base + a * (cos_a * u + std::sqrt(1.0 - cos_a * cos_a) * v);
    const Mat3 base_rot = frame_from(knee - base, g.pole) * frame_from(off[l.mid], l.rest_normal).transpose();
    const Mat3 mid_rot = frame_from(end - knee, g.pole) * frame_from(off[l.end], l.rest_normal).transpose();
    pose.theta[l.base] = log_map(parent_rot.transpose() * base_rot);
    pose.theta[l.mid] = log_map(base_rot.transpose() * mid_rot);
    pose.theta[l.end] = log_map(mid_rot.transpose() * g.end_rotation);
  }
  return pose;
}

Motion perform(const Skeleton& skel, const ShapeParams& beta, const ScenarioSpec& spec, const Script& script) {
  const BoneOffsets off = bone_offsets(skel, beta);
  const Body body(off);
  const ScriptContext ctx{body, spec.duration};
  Motion m;
  m.fps = spec.fps;
  m.frames.reserve(spec.frame_count());
  for (std::size_t k = 0; k < spec.frame_count(); ++k) {
    m.frames.push_back(build_pose(skel, off, script(ctx, static_cast<double>(k) / spec.fps), k));
  }
  return m;
}

ConstraintSet contacts(const Skeleton& skel, const ShapeParams& beta, const ScenarioSpec& spec, const Script& script) {
  const BoneOffsets off = bone_offsets(skel, beta);
  const Body body(off);
  const ScriptContext ctx{body, spec.duration};
  ConstraintSet out;
  out.camera = synth_camera();
  std::array<std::size_t, 4> seen{};
  for (std::size_t k = 0; k < spec.frame_count(); ++k) {
    const FrameScript s = script(ctx, static_cast<double>(k) / spec.fps);
    for (std::size_t i = 0; i < kLimbs.size(); ++i) {
      const Contact& c = s.contacts[i];
      if (!c.active || seen[i]++ % static_cast<std::size_t>(spec.constraint_stride) != 0) {
        continue;
      }
      Constraint con;
      con.frame = k;
      con.joint = kLimbs[i].tip;
      con.kind = c.kind;
      con.label = c.label;
      con.position = s.limbs[i].world;
      if (c.kind == ConstraintKind::Pixel2D) {
        con.pixel = out.camera->project_world(con.position);
        con.position = Vec3::Zero();
      }
      out.constraints.push_back(con);
    }
  }
  return out;
}

constexpr std::array<std::pair<int, int>, 5> kSpikeJoints = {{
    {kLeftAnkle, kLeftFoot},
    {kRightAnkle, kRightFoot},
    {kLeftWrist, kLeftHand},
    {kRightWrist, kRightHand},
    {kNeck, kHead},
}};

std::vector<InjectedSpike> add_noise(Motion& m, const BoneOffsets& bones, const ScenarioSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (spec.noise_sigma > 0.0) {
    for (Pose& p : m.frames) {
      for (Vec3& th : p.theta) {
        for (int c = 0; c < 3; ++c) {
          th[c] += spec.noise_sigma * gauss(rng);
        }
      }
    }
  }
  std::vector<InjectedSpike> spikes;
  if (spec.spike_count == 0) {
    return spikes;
  }
  // Spikes keep two frames from the ends and three frames from each other.
  std::vector<std::size_t> candidates;
  for (std::size_t k = 2; k + 2 < m.size(); ++k) {
    candidates.push_back(k);
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  for (std::size_t k : candidates) {
    if (static_cast<int>(spikes.size()) == spec.spike_count) {
      break;
    }
    const bool crowded = std::any_of(spikes.begin(), spikes.end(), [&](const InjectedSpike& s) {
      return (s.frame > k ? s.frame - k : k - s.frame) < 3;
    });
    if (!crowded) {
      const auto [joint, leaf] = kSpikeJoints[std::uniform_int_distribution<std::size_t>(0, kSpikeJoints.size() - 1)(rng)];
      spikes.push_back({k, joint, leaf});
    }
  }
  if (static_cast<int>(spikes.size()) < spec.spike_count) {
    throw InputError("cannot place " + std::to_string(spec.spike_count) + " spikes in " + std::to_string(m.size()) +
                     " frames");
  }
  std::sort(spikes.begin(), spikes.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
  for (const InjectedSpike& s : spikes) {
    // Axis perpendicular to the driven bone so the leaf always moves.
    const Vec3 bone = bones[s.leaf_joint].normalized();
    Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
    axis -= axis.dot(bone) * bone;
    axis.normalize();
    Vec3& th = m.frames[s.frame].theta[s.angle_joint];
    th = log_map(exp_map(th) * exp_map(spec.spike_angle * axis));
  }
  return spikes;
}

} // namespace

std::vector<std::string> synth_templates() {
  return {"walk", "jump", "pickup-box", "touch-cone"};
}

std::size_t ScenarioSpec::frame_count() const {
  return static_cast<std::size_t>(std::llround(duration * fps));
}

void ScenarioSpec::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps) || !(duration > 0.0) || !std::isfinite(duration)) {
    throw InputError("scenario duration and fps must be positive");
  }
  if (frame_count() < 4) {
    throw InputError("scenario needs at least 4 frames (duration * fps = " + std::to_string(duration * fps) + ")");
  }
  if (!(noise_sigma >= 0.0) || spike_count < 0 || !(spike_angle > 0.0 && spike_angle < kPi) ||
      constraint_stride < 1) {
    throw InputError("invalid noise settings: noise_sigma >= 0, spike_count >= 0, 0 < spike_angle < pi, "
                     "constraint_stride >= 1");
  }
  source.validate();
  target.validate();
  find_script(motion);
}

Camera synth_camera() {
  Camera cam;
  cam.intrinsics = CameraIntrinsics{1000.0, 1000.0, 960.0, 540.0, 1920, 1080};
  cam.world_to_camera.rotation = Vec3(1.0, -1.0, -1.0).asDiagonal();
  cam.world_to_camera.translation = Vec3(0.0, 1.0, 4.0);
  return cam;
}

Scenario generate(const Skeleton& skel, const ScenarioSpec& spec) {
  spec.validate();
  if (skel.parents() != default_skeleton().parents()) {
    throw InputError("synthetic scenarios need the default 24-joint layout");
  }
  const Script script = find_script(spec.motion);
  Scenario out;
  out.clean_source = perform(skel, spec.source, spec, script);
  out.target = spec.target == spec.source ? out.clean_source : perform(skel, spec.target, spec, script);
  out.constraints = contacts(skel, spec.target, spec, script);
  out.source = out.clean_source;
  out.spikes = add_noise(out.source, bone_offsets(skel, spec.source), spec);
  return out;
}

} // namespace rtk
