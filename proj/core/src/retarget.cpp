#include "rtk/retarget.hpp"

#include "rtk/error.hpp"

#include <algorithm>
#include <cmath>

namespace rtk {

namespace {

double sign(double v) {
  return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

Vec3 sign(const Vec3& v) {
  return {sign(v.x()), sign(v.y()), sign(v.z())};
}

Vec2 sign(const Vec2& v) {
  return {sign(v.x()), sign(v.y())};
}

std::string describe(const Constraint& c, const Skeleton& skel) {
  return "constraint at frame " + std::to_string(c.frame) + " on joint '" + skel.joint_label(c.joint) + "'";
}

} // namespace

bool ConstraintSet::has_pixel_constraints() const {
  return std::any_of(constraints.begin(), constraints.end(), [](const Constraint& c) {
    return c.kind == ConstraintKind::Pixel2D;
  });
}

void ConstraintSet::validate(const Skeleton& skel, std::size_t frame_count) const {
  for (const Constraint& c : constraints) {
    if (c.frame >= frame_count) {
      throw InputError(describe(c, skel) + ": frame out of range (motion has " + std::to_string(frame_count) +
                       " frames)");
    }
    if (c.joint < 0 || c.joint >= kJointCount || !skel.is_end_effector(c.joint)) {
      throw InputError("constraint at frame " + std::to_string(c.frame) + ": joint " + std::to_string(c.joint) +
                       " is not a declared end-effector");
    }
    if (c.kind == ConstraintKind::Position3D && !c.position.allFinite()) {
      throw InputError(describe(c, skel) + ": non-finite 3D target");
    }
    if (c.kind == ConstraintKind::Pixel2D && !c.pixel.allFinite()) {
      throw InputError(describe(c, skel) + ": non-finite pixel target");
    }
  }
  if (has_pixel_constraints() && !camera.has_value()) {
    throw InputError("2D constraints require a camera");
  }
  if (camera) {
    camera->validate();
  }
}

JointWeights JointWeights::from_depth(const Skeleton& skel) {
  JointWeights out;
  const double d = std::max(1, skel.max_depth());
  for (int j = 0; j < kJointCount; ++j) {
    out.w[j] = 1.0 + (d - skel.depth(j)) / d;
  }
  return out;
}

void JointWeights::validate(const Skeleton& skel) const {
  for (int j = 0; j < kJointCount; ++j) {
    if (!(w[j] >= 0.0) || !std::isfinite(w[j])) {
      throw InputError("joint weights must be finite and non-negative");
    }
  }
  if (*std::max_element(w.begin(), w.end()) > w[skel.root()]) {
    throw InputError("the root joint must carry the largest weight");
  }
}

void RetargetConfig::validate() const {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0) || !(lambda3 > 0.0)) {
    throw InputError("retarget loss weights lambda1..3 must be positive");
  }
  if (!(window_seconds > 0.0) || iterations <= 0) {
    throw InputError("retarget window length and iteration count must be positive");
  }
  optimizer().validate();
}

AdamOptions RetargetConfig::optimizer() const {
  AdamOptions opt;
  opt.learning_rate = learning_rate;
  opt.beta1 = beta1;
  opt.beta2 = beta2;
  opt.iterations = iterations;
  return opt;
}

std::size_t RetargetConfig::window_frames(double fps) const {
  const auto n = static_cast<long long>(std::llround(window_seconds * fps));
  return static_cast<std::size_t>(std::max(2LL, n));
}

OffsetSequence OffsetSequence::zeros(std::size_t frames, bool with_root) {
  OffsetSequence s;
  AngleOffsets zero;
  zero.fill(Vec3::Zero());
  s.e.assign(frames, zero);
  if (with_root) {
    s.root_offsets.assign(frames, Vec3::Zero());
  }
  return s;
}

Eigen::VectorXd OffsetSequence::pack() const {
  const auto n = static_cast<Eigen::Index>(e.size());
  Eigen::VectorXd x(n * 3 * kJointCount + static_cast<Eigen::Index>(root_offsets.size()) * 3);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      x.segment<3>((k * kJointCount + j) * 3) = e[k][j];
    }
  }
  const Eigen::Index base = n * 3 * kJointCount;
  for (std::size_t k = 0; k < root_offsets.size(); ++k) {
    x.segment<3>(base + static_cast<Eigen::Index>(k) * 3) = root_offsets[k];
  }
  return x;
}

void OffsetSequence::unpack(const Eigen::VectorXd& x) {
  const auto n = static_cast<Eigen::Index>(e.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      e[k][j] = x.segment<3>((k * kJointCount + j) * 3);
    }
  }
  const Eigen::Index base = n * 3 * kJointCount;
  for (std::size_t k = 0; k < root_offsets.size(); ++k) {
    root_offsets[k] = x.segment<3>(base + static_cast<Eigen::Index>(k) * 3);
  }
}

Pose apply_offsets(const Pose& source, const AngleOffsets& e, const Vec3& root_offset) {
  Pose out = source;
  for (int j = 0; j < kJointCount; ++j) {
    out.theta[j] += e[j];
  }
  out.root_t += root_offset;
  return out;
}

std::array<Vec3, kJointCount> motion_delta(
    const Skeleton& skel,
    const ShapeParams& beta,
    const Pose& current,
    const Pose& next) {
  const BoneOffsets offsets = bone_offsets(skel, beta);
  const JointPoses a = forward_kinematics(skel, offsets, current);
  const JointPoses b = forward_kinematics(skel, offsets, next);
  std::array<Vec3, kJointCount> out;
  for (int j = 0; j < kJointCount; ++j) {
    out[j] = b[j].translation - a[j].translation;
  }
  return out;
}

double loss_style(
    const Skeleton& skel,
    const ShapeParams& beta_target,
    const ShapeParams& beta_source,
    const std::vector<Pose>& source_window,
    const std::vector<AngleOffsets>& e) {
  if (source_window.size() != e.size()) {
    throw InputError("loss_style: offsets and window differ in length");
  }
  double loss = 0.0;
  for (std::size_t k = 0; k + 1 < source_window.size(); ++k) {
    const auto target = motion_delta(
        skel, beta_target, apply_offsets(source_window[k], e[k]), apply_offsets(source_window[k + 1], e[k + 1]));
    const auto source = motion_delta(skel, beta_source, source_window[k], source_window[k + 1]);
    for (int j = 0; j < kJointCount; ++j) {
      loss += (target[j] - source[j]).lpNorm<1>();
    }
  }
  return loss;
}

double loss_3d(
    const Skeleton& skel,
    const ShapeParams& beta_target,
    const Pose& source,
    const AngleOffsets& e,
    const std::vector<Constraint>& constraints) {
  const JointPoses poses = forward_kinematics(skel, beta_target, apply_offsets(source, e));
  double loss = 0.0;
  for (const Constraint& c : constraints) {
    if (c.kind == ConstraintKind::Position3D) {
      loss += (poses[c.joint].translation - c.position).lpNorm<1>();
    }
  }
  return loss;
}

double loss_2d(
    const Skeleton& skel,
    const ShapeParams& beta_target,
    const Pose& source,
    const AngleOffsets& e,
    const std::vector<Constraint>& constraints,
    const Camera& camera) {
  const JointPoses poses = forward_kinematics(skel, beta_target, apply_offsets(source, e));
  double loss = 0.0;
  for (const Constraint& c : constraints) {
    if (c.kind != ConstraintKind::Pixel2D) {
      continue;
    }
    try {
      loss += (camera.project_world(poses[c.joint].translation) - c.pixel).lpNorm<1>();
    } catch (const BehindCameraError&) {
      throw BehindCameraError(describe(c, skel) + ": joint is behind the camera");
    }
  }
  return loss;
}

RetargetObjective::RetargetObjective(
    const Skeleton& skel,
    const ShapeParams& beta_source,
    const ShapeParams& beta_target,
    std::vector<Pose> source_window,
    std::vector<Constraint> constraints,
    std::optional<Camera> camera,
    JointWeights weights,
    const RetargetConfig& config)
    : skel_(&skel),
      target_offsets_(bone_offsets(skel, beta_target)),
      source_(std::move(source_window)),
      per_frame_(source_.size()),
      camera_(std::move(camera)),
      weights_(weights),
      lambda1_(config.lambda1),
      lambda2_(config.lambda2),
      lambda3_(config.lambda3),
      with_root_(config.optimize_root_translation) {
  if (source_.empty()) {
    throw InputError("retargeting window is empty");
  }
  const BoneOffsets source_offsets = bone_offsets(skel, beta_source);
  std::vector<JointPositions> source_positions;
  source_positions.reserve(source_.size());
  for (const Pose& p : source_) {
    source_positions.push_back(joint_positions(forward_kinematics(skel, source_offsets, p)));
  }
  for (std::size_t k = 0; k + 1 < source_.size(); ++k) {
    std::array<Vec3, kJointCount> d;
    for (int j = 0; j < kJointCount; ++j) {
      d[j] = source_positions[k + 1][j] - source_positions[k][j];
    }
    source_deltas_.push_back(d);
  }
  for (Constraint& c : constraints) {
    if (c.frame >= source_.size()) {
      throw InputError("window constraint frame out of range");
    }
    if (c.kind == ConstraintKind::Pixel2D && !camera_) {
      throw InputError("2D constraints require a camera");
    }
    per_frame_[c.frame].push_back(std::move(c));
  }
}

Eigen::Index RetargetObjective::dimension() const {
  const auto n = static_cast<Eigen::Index>(source_.size());
  return n * 3 * kJointCount + (with_root_ ? n * 3 : 0);
}

LossBreakdown RetargetObjective::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  OffsetSequence seq = OffsetSequence::zeros(source_.size(), with_root_);
  seq.unpack(x);
  return evaluate(seq, grad);
}

LossBreakdown RetargetObjective::evaluate(const OffsetSequence& x, Eigen::VectorXd* grad) const {
  const std::size_t n = source_.size();
  if (x.size() != n || (with_root_ && x.root_offsets.size() != n)) {
    throw InputError("offset sequence does not match the retargeting window");
  }
  const Skeleton& skel = *skel_;

  std::vector<Pose> poses(n);
  std::vector<JointPoses> fk(n);
  for (std::size_t k = 0; k < n; ++k) {
    poses[k] = apply_offsets(source_[k], x.e[k], with_root_ ? x.root_offsets[k] : Vec3::Zero());
    fk[k] = forward_kinematics(skel, target_offsets_, poses[k]);
  }

  LossBreakdown out;
  const bool want_grad = grad != nullptr;
  std::vector<std::array<Vec3, kJointCount>> gpos;
  if (want_grad) {
    std::array<Vec3, kJointCount> zero;
    zero.fill(Vec3::Zero());
    gpos.assign(n, zero);
  }

  double norm_sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      norm_sq += weights_.w[j] * weights_.w[j] * x.e[k][j].squaredNorm();
    }
  }
  out.offset_norm = std::sqrt(norm_sq);

  for (std::size_t k = 0; k + 1 < n; ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      const Vec3 d = fk[k + 1][j].translation - fk[k][j].translation - source_deltas_[k][j];
      out.style += d.lpNorm<1>();
      if (want_grad) {
        const Vec3 s = lambda1_ * sign(d);
        gpos[k + 1][j] += s;
        gpos[k][j] -= s;
      }
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    for (const Constraint& c : per_frame_[k]) {
      const Vec3& p = fk[k][c.joint].translation;
      if (c.kind == ConstraintKind::Position3D) {
        const Vec3 r = p - c.position;
        out.position3d += r.lpNorm<1>();
        if (want_grad) {
          gpos[k][c.joint] += lambda2_ * sign(r);
        }
      } else {
        Vec2 r;
        try {
          r = camera_->project_world(p) - c.pixel;
        } catch (const BehindCameraError&) {
          throw BehindCameraError(describe(c, skel) + ": joint is behind the camera");
        }
        out.pixel2d += r.lpNorm<1>();
        if (want_grad) {
          gpos[k][c.joint] += camera_->project_world_jacobian(p).transpose() * (lambda3_ * sign(r));
        }
      }
    }
  }

  out.total = out.offset_norm + lambda1_ * out.style + lambda2_ * out.position3d + lambda3_ * out.pixel2d;

  if (want_grad) {
    grad->setZero(dimension());
    const Eigen::Index root_base = static_cast<Eigen::Index>(n) * 3 * kJointCount;
    for (std::size_t k = 0; k < n; ++k) {
      const PoseGradient pg = backpropagate_positions(skel, poses[k], fk[k], gpos[k]);
      const auto ki = static_cast<Eigen::Index>(k);
      for (int j = 0; j < kJointCount; ++j) {
        Vec3 g = pg.theta[j];
        if (out.offset_norm > 0.0) {
          g += weights_.w[j] * weights_.w[j] * x.e[k][j] / out.offset_norm;
        }
        grad->segment<3>((ki * kJointCount + j) * 3) = g;
      }
      if (with_root_) {
        grad->segment<3>(root_base + ki * 3) = pg.root_t;
      }
    }
  }
  return out;
}

double total_loss(const RetargetObjective& objective, const OffsetSequence& x) {
  return objective.evaluate(x).total;
}

Eigen::VectorXd loss_gradient(const RetargetObjective& objective, const OffsetSequence& x) {
  Eigen::VectorXd g;
  objective.evaluate(x, &g);
  return g;
}

namespace {

constexpr double kWarmConstraintWeight = 1e4;
constexpr double kWarmOffsetPull = 1e-3;
constexpr double kWarmRootPull = 1e-6;
constexpr int kWarmIterations = 30;

using FrameJacobian = Eigen::Matrix<double, 3 * kJointCount, Eigen::Dynamic>;

// Smooth least-squares stand-in for the window objective: squared style
// residuals, heavily weighted squared constraint residuals (2D residuals
// scaled to meters at the joint's depth) and a small pull of e toward zero.
class WarmStartProblem {
 public:
  WarmStartProblem(
      const Skeleton& skel,
      const BoneOffsets& target_offsets,
      const std::vector<Pose>& source,
      const std::vector<std::array<Vec3, kJointCount>>& source_deltas,
      const std::vector<std::vector<const Constraint*>>& per_frame,
      const std::optional<Camera>& camera,
      const JointWeights& weights,
      double style_weight,
      bool with_root,
      const Vec3& root_anchor)
      : skel_(skel),
        offsets_(target_offsets),
        source_(source),
        deltas_(source_deltas),
        per_frame_(per_frame),
        camera_(camera),
        style_weight_(style_weight),
        with_root_(with_root),
        nv_(3 * kJointCount + (with_root ? 3 : 0)),
        pull_(Eigen::VectorXd::Zero(nv_)),
        anchor_(Eigen::VectorXd::Zero(nv_)) {
    for (int j = 0; j < kJointCount; ++j) {
      pull_.segment<3>(3 * j).setConstant(kWarmOffsetPull * weights.w[j] * weights.w[j]);
    }
    if (with_root) {
      pull_.tail<3>().setConstant(kWarmRootPull);
      anchor_.tail<3>() = root_anchor;
    }
  }

  Eigen::Index frame_dim() const {
    return nv_;
  }

  struct Linearization {
    double cost = 0.0;
    std::vector<Eigen::MatrixXd> diag;
    std::vector<Eigen::MatrixXd> upper;  // block (k, k + 1)
    std::vector<Eigen::VectorXd> grad;
  };

  // Cost, and with `lin` the Gauss-Newton blocks, at per-frame variables x.
  double evaluate(const std::vector<Eigen::VectorXd>& x, Linearization* lin) const {
    const std::size_t n = source_.size();
    std::vector<Pose> poses(n);
    std::vector<JointPoses> fk(n);
    for (std::size_t k = 0; k < n; ++k) {
      poses[k] = pose_at(k, x[k]);
      fk[k] = forward_kinematics(skel_, offsets_, poses[k]);
    }
    std::vector<FrameJacobian> jac;
    if (lin != nullptr) {
      lin->diag.assign(n, Eigen::MatrixXd::Zero(nv_, nv_));
      lin->upper.assign(n > 0 ? n - 1 : 0, Eigen::MatrixXd::Zero(nv_, nv_));
      lin->grad.assign(n, Eigen::VectorXd::Zero(nv_));
      jac.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        jac[k] = position_jacobian(poses[k], fk[k]);
      }
    }
    double cost = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::VectorXd d = x[k] - anchor_;
      cost += d.dot(pull_.cwiseProduct(d));
      if (lin != nullptr) {
        lin->diag[k].diagonal() += pull_;
        lin->grad[k] += pull_.cwiseProduct(d);
      }
      for (const Constraint* c : per_frame_[k]) {
        const Vec3& p = fk[k][c->joint].translation;
        Eigen::VectorXd r;
        Eigen::MatrixXd a;
        if (c->kind == ConstraintKind::Position3D) {
          r = p - c->position;
          if (lin != nullptr) {
            a = jac[k].middleRows<3>(3 * c->joint);
          }
        } else {
          const double scale = std::max(camera_->to_camera(p).z(), kMinDepth) / camera_->intrinsics.fx;
          r = scale * (camera_->project_world(p) - c->pixel);
          if (lin != nullptr) {
            a = scale * camera_->project_world_jacobian(p) * jac[k].middleRows<3>(3 * c->joint);
          }
        }
        cost += kWarmConstraintWeight * r.squaredNorm();
        if (lin != nullptr) {
          lin->diag[k] += kWarmConstraintWeight * a.transpose() * a;
          lin->grad[k] += kWarmConstraintWeight * a.transpose() * r;
        }
      }
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
      Eigen::VectorXd r(3 * kJointCount);
      for (int j = 0; j < kJointCount; ++j) {
        r.segment<3>(3 * j) = fk[k + 1][j].translation - fk[k][j].translation - deltas_[k][j];
      }
      cost += style_weight_ * r.squaredNorm();
      if (lin != nullptr) {
        lin->diag[k] += style_weight_ * jac[k].transpose() * jac[k];
        lin->diag[k + 1] += style_weight_ * jac[k + 1].transpose() * jac[k + 1];
        lin->upper[k] -= style_weight_ * jac[k].transpose() * jac[k + 1];
        lin->grad[k] -= style_weight_ * jac[k].transpose() * r;
        lin->grad[k + 1] += style_weight_ * jac[k + 1].transpose() * r;
      }
    }
    if (lin != nullptr) {
      lin->cost = cost;
    }
    return cost;
  }

  Pose pose_at(std::size_t k, const Eigen::VectorXd& v) const {
    AngleOffsets e;
    for (int j = 0; j < kJointCount; ++j) {
      e[j] = v.segment<3>(3 * j);
    }
    return apply_offsets(source_[k], e, with_root_ ? Vec3(v.tail<3>()) : Vec3::Zero());
  }

 private:
  FrameJacobian position_jacobian(const Pose& pose, const JointPoses& fk) const {
    FrameJacobian jac(3 * kJointCount, nv_);
    std::array<Vec3, kJointCount> seed;
    for (int j = 0; j < kJointCount; ++j) {
      for (int i = 0; i < 3; ++i) {
        seed.fill(Vec3::Zero());
        seed[j] = Vec3::Unit(i);
        const PoseGradient g = backpropagate_positions(skel_, pose, fk, seed);
        for (int a = 0; a < kJointCount; ++a) {
          jac.block<1, 3>(3 * j + i, 3 * a) = g.theta[a].transpose();
        }
        if (with_root_) {
          jac.block<1, 3>(3 * j + i, 3 * kJointCount) = g.root_t.transpose();
        }
      }
    }
    return jac;
  }

  const Skeleton& skel_;
  const BoneOffsets& offsets_;
  const std::vector<Pose>& source_;
  const std::vector<std::array<Vec3, kJointCount>>& deltas_;
  const std::vector<std::vector<const Constraint*>>& per_frame_;
  const std::optional<Camera>& camera_;
  double style_weight_;
  bool with_root_;
  Eigen::Index nv_;
  Eigen::VectorXd pull_;
  Eigen::VectorXd anchor_;
};

// Solves the symmetric block-tridiagonal system (diag, upper) x = rhs.
std::vector<Eigen::VectorXd> solve_block_tridiagonal(
    const std::vector<Eigen::MatrixXd>& diag,
    const std::vector<Eigen::MatrixXd>& upper,
    std::vector<Eigen::VectorXd> rhs) {
  const std::size_t n = diag.size();
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> schur(n);
  schur[0].compute(diag[0]);
  for (std::size_t k = 1; k < n; ++k) {
    const Eigen::MatrixXd m = upper[k - 1].transpose() * schur[k - 1].solve(Eigen::MatrixXd::Identity(diag[k].rows(), diag[k].cols()));
    schur[k].compute(diag[k] - m * upper[k - 1]);
    rhs[k] -= m * rhs[k - 1];
  }
  std::vector<Eigen::VectorXd> x(n);
  x[n - 1] = schur[n - 1].solve(rhs[n - 1]);
  for (std::size_t k = n - 1; k-- > 0;) {
    x[k] = schur[k].solve(rhs[k] - upper[k] * x[k + 1]);
  }
  return x;
}

} // namespace

OffsetSequence constraint_warm_start(
    const Skeleton& skel,
    const ShapeParams& beta_source,
    const ShapeParams& beta_target,
    const std::vector<Pose>& source_window,
    const std::vector<Constraint>& constraints,
    const std::optional<Camera>& camera,
    const JointWeights& weights,
    const RetargetConfig& config,
    const FrameOffsets* pinned_first) {
  const std::size_t n = source_window.size();
  const bool with_root = config.optimize_root_translation;
  OffsetSequence out = OffsetSequence::zeros(n, with_root);
  if (n == 0) {
    return out;
  }
  std::vector<std::vector<const Constraint*>> per_frame(n);
  for (const Constraint& c : constraints) {
    if (c.frame >= n) {
      throw InputError("window constraint frame out of range");
    }
    if (c.kind == ConstraintKind::Pixel2D && !camera) {
      throw InputError("2D constraints require a camera");
    }
    per_frame[c.frame].push_back(&c);
  }
  const BoneOffsets target_offsets = bone_offsets(skel, beta_target);
  const BoneOffsets source_offsets = bone_offsets(skel, beta_source);
  std::vector<JointPositions> source_positions;
  for (const Pose& p : source_window) {
    source_positions.push_back(joint_positions(forward_kinematics(skel, source_offsets, p)));
  }
  std::vector<std::array<Vec3, kJointCount>> deltas(n > 0 ? n - 1 : 0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      deltas[k][j] = source_positions[k + 1][j] - source_positions[k][j];
    }
  }
  // Root translation starts at the mean 3D correction of the zero-offset pose.
  Vec3 root_anchor = Vec3::Zero();
  std::size_t count = 0;
  for (const Constraint& c : constraints) {
    if (c.kind == ConstraintKind::Position3D) {
      root_anchor += c.position - forward_kinematics(skel, target_offsets, source_window[c.frame])[c.joint].translation;
      ++count;
    }
  }
  if (count > 0) {
    root_anchor /= static_cast<double>(count);
  }

  const WarmStartProblem problem(
      skel, target_offsets, source_window, deltas, per_frame, camera, weights, config.lambda1, with_root, root_anchor);
  const Eigen::Index nv = problem.frame_dim();
  std::vector<Eigen::VectorXd> x(n, Eigen::VectorXd::Zero(nv));
  if (with_root) {
    for (auto& v : x) {
      v.tail<3>() = root_anchor;
    }
  }
  if (pinned_first != nullptr) {
    for (int j = 0; j < kJointCount; ++j) {
      x[0].segment<3>(3 * j) = pinned_first->e[j];
    }
    if (with_root) {
      x[0].tail<3>() = pinned_first->root;
    }
  }

  WarmStartProblem::Linearization lin;
  double cost = problem.evaluate(x, &lin);
  double damping = 1e-6;
  for (int it = 0; it < kWarmIterations; ++it) {
    auto diag = lin.diag;
    std::vector<Eigen::VectorXd> rhs(n);
    for (std::size_t k = 0; k < n; ++k) {
      diag[k].diagonal().array() += damping * (1.0 + diag[k].diagonal().array());
      rhs[k] = -lin.grad[k];
    }
    auto upper = lin.upper;
    if (pinned_first != nullptr) {
      diag[0].setIdentity();
      rhs[0].setZero();
      if (n > 1) {
        upper[0].setZero();
      }
    }
    const auto step = solve_block_tridiagonal(diag, upper, rhs);
    std::vector<Eigen::VectorXd> trial(n);
    double step_norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      trial[k] = x[k] + step[k];
      step_norm = std::max(step_norm, step[k].lpNorm<Eigen::Infinity>());
    }
    double trial_cost;
    try {
      trial_cost = problem.evaluate(trial, nullptr);
    } catch (const BehindCameraError&) {
      trial_cost = std::numeric_limits<double>::infinity();
    }
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      const double gain = cost - trial_cost;
      x = std::move(trial);
      cost = problem.evaluate(x, &lin);
      damping = std::max(damping * 0.3, 1e-12);
      if (gain <= 1e-12 * cost || step_norm < 1e-10) {
        break;
      }
    } else {
      damping *= 10.0;
      if (damping > 1e6) {
        break;
      }
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      out.e[k][j] = x[k].segment<3>(3 * j);
    }
    if (with_root) {
      out.root_offsets[k] = x[k].tail<3>();
    }
  }
  return out;
}

OffsetSequence retarget_window(
    const Skeleton& skel,
    const ShapeParams& beta_source,
    const ShapeParams& beta_target,
    const std::vector<Pose>& source_window,
    const std::vector<Constraint>& constraints,
    const std::optional<Camera>& camera,
    const JointWeights& weights,
    const RetargetConfig& config,
    const OffsetSequence* init,
    bool freeze_first) {
  config.validate();
  const RetargetObjective objective(
      skel, beta_source, beta_target, source_window, constraints, camera, weights, config);
  OffsetSequence x = init != nullptr ? *init : OffsetSequence::zeros(source_window.size(), objective.with_root());
  if (x.size() != source_window.size() || x.root_offsets.size() != (objective.with_root() ? x.size() : 0)) {
    throw InputError("retarget_window: initial offsets do not match the window");
  }
  const auto n = static_cast<Eigen::Index>(source_window.size());
  const Objective fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
    const double loss = objective.evaluate(v, &g).total;
    if (freeze_first) {
      // Zero gradients keep Adam's moments, and so the step, at zero.
      g.head<3 * kJointCount>().setZero();
      if (objective.with_root()) {
        g.segment<3>(n * 3 * kJointCount).setZero();
      }
    }
    return loss;
  };
  AdamResult res;
  try {
    res = minimize_adam(fn, x.pack(), config.optimizer());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("retarget_window: ") + e.what());
  }
  x.unpack(res.x);
  x.loss_trace = std::move(res.trace);
  x.initial_loss = res.initial_loss;
  x.final_loss = res.final_loss;
  return x;
}

std::vector<WindowRange> window_ranges(std::size_t frame_count, std::size_t window) {
  std::vector<WindowRange> out;
  if (frame_count == 0) {
    return out;
  }
  window = std::max<std::size_t>(window, 2);
  std::size_t first = 0;
  while (true) {
    const std::size_t last = std::min(first + window - 1, frame_count - 1);
    out.push_back({first, last});
    if (last == frame_count - 1) {
      break;
    }
    first = last;
  }
  if (out.size() > 1 && 2 * (out.back().last - out.back().first + 1) < window) {
    out[out.size() - 2].last = out.back().last;
    out.pop_back();
  }
  return out;
}

RetargetResult retarget_motion(
    const Skeleton& skel,
    const Motion& source,
    const ShapeParams& beta_source,
    const ShapeParams& beta_target,
    const ConstraintSet& constraints,
    const RetargetConfig& config) {
  source.validate();
  config.validate();
  beta_source.validate();
  beta_target.validate();
  constraints.validate(skel, source.size());
  const JointWeights weights = config.weights.value_or(JointWeights::from_depth(skel));
  weights.validate(skel);

  const std::size_t n = source.size();
  const bool with_root = config.optimize_root_translation;
  RetargetResult out;
  AngleOffsets zero;
  zero.fill(Vec3::Zero());
  out.e.assign(n, zero);
  out.root_offsets.assign(n, Vec3::Zero());

  const auto ranges = window_ranges(n, config.window_frames(source.fps));
  for (std::size_t w = 0; w < ranges.size(); ++w) {
    const WindowRange r = ranges[w];
    const std::size_t len = r.last - r.first + 1;
    std::vector<Pose> window(source.frames.begin() + static_cast<std::ptrdiff_t>(r.first),
                             source.frames.begin() + static_cast<std::ptrdiff_t>(r.last + 1));
    std::vector<Constraint> local;
    for (const Constraint& c : constraints.constraints) {
      if (c.frame >= r.first && c.frame <= r.last) {
        Constraint lc = c;
        lc.frame -= r.first;
        local.push_back(std::move(lc));
      }
    }
    FrameOffsets overlap{out.e[r.first], out.root_offsets[r.first]};
    OffsetSequence init = config.warm_start
                              ? constraint_warm_start(skel, beta_source, beta_target, window, local, constraints.camera,
                                                      weights, config, w > 0 ? &overlap : nullptr)
                              : OffsetSequence::zeros(len, with_root);
    if (w > 0) {
      init.e[0] = out.e[r.first];
      if (with_root) {
        init.root_offsets[0] = out.root_offsets[r.first];
      }
    }
    OffsetSequence sol;
    try {
      sol = retarget_window(
          skel, beta_source, beta_target, window, local, constraints.camera, weights, config, &init, w > 0);
    } catch (const NumericalError& e) {
      throw NumericalError("window " + std::to_string(w) + " (frames " + std::to_string(r.first) + "-" +
                           std::to_string(r.last) + "): " + e.what());
    }
    const std::size_t skip = w > 0 ? 1 : 0;
    for (std::size_t k = skip; k < len; ++k) {
      out.e[r.first + k] = sol.e[k];
      if (with_root) {
        out.root_offsets[r.first + k] = sol.root_offsets[k];
      }
    }
    out.windows.push_back({r, std::move(sol.loss_trace), sol.initial_loss, sol.final_loss});
  }

  out.motion.fps = source.fps;
  out.motion.frames.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.motion.frames.push_back(apply_offsets(source.frames[k], out.e[k], out.root_offsets[k]));
  }
  return out;
}

Motion direct_transfer(const Motion& source) {
  return source;
}

std::vector<ConstraintResidual> constraint_residuals(
    const Skeleton& skel,
    const ShapeParams& beta,
    const Motion& motion,
    const ConstraintSet& constraints) {
  constraints.validate(skel, motion.size());
  const BoneOffsets offsets = bone_offsets(skel, beta);
  std::vector<ConstraintResidual> out;
  out.reserve(constraints.constraints.size());
  for (const Constraint& c : constraints.constraints) {
    const Vec3 p = forward_kinematics(skel, offsets, motion.frames[c.frame])[c.joint].translation;
    double r;
    if (c.kind == ConstraintKind::Position3D) {
      r = (p - c.position).norm();
    } else {
      try {
        r = (constraints.camera->project_world(p) - c.pixel).norm();
      } catch (const BehindCameraError&) {
        throw BehindCameraError(describe(c, skel) + ": joint is behind the camera");
      }
    }
    out.push_back({c.frame, c.joint, c.kind, r});
  }
  return out;
}

} // namespace rtk
