#include "test_support.hpp"

#include "rtk/error.hpp"
#include "rtk/metrics.hpp"
#include "rtk/retarget.hpp"
#include "rtk/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace rtk {
namespace {

using testing::Rng;

Vec3 chain_position(const Skeleton& skel, const ShapeParams& beta, const Pose& pose, int joint) {
  return testing::chain_fk(skel, beta, pose)[joint].topRightCorner<3, 1>();
}

Camera test_camera() {
  Camera cam;
  cam.world_to_camera.rotation = Vec3(1.0, -1.0, -1.0).asDiagonal();
  cam.world_to_camera.translation = Vec3(0.0, 1.0, 4.0);
  return cam;
}

struct Window {
  std::vector<Pose> poses;
  std::vector<AngleOffsets> e;
  std::vector<Vec3> root;
  std::vector<Constraint> constraints;
};

Window random_window(Rng& rng, const Skeleton& skel, std::size_t n) {
  Window w;
  for (std::size_t k = 0; k < n; ++k) {
    w.poses.push_back(testing::random_pose(rng, 0.4, 0.2));
    AngleOffsets e;
    for (auto& v : e) {
      v = testing::random_vec3(rng, 0.3);
    }
    w.e.push_back(e);
    w.root.push_back(testing::random_vec3(rng, 0.1));
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (int j : skel.end_effectors()) {
      Constraint c;
      c.frame = k;
      c.joint = j;
      if ((k + static_cast<std::size_t>(j)) % 2 == 0) {
        c.kind = ConstraintKind::Position3D;
        c.position = testing::random_vec3(rng, 1.0) + Vec3(0.0, 1.0, 0.0);
      } else {
        c.kind = ConstraintKind::Pixel2D;
        c.pixel = Vec2(testing::uniform(rng, 200, 1700), testing::uniform(rng, 100, 1000));
      }
      w.constraints.push_back(c);
    }
  }
  return w;
}

TEST(RetargetLoss, StyleMatchesChainOracle) {
  Rng rng(40);
  const Skeleton skel = default_skeleton();
  const ShapeParams bs = testing::random_beta(rng);
  const ShapeParams bt = testing::random_beta(rng);
  const Window w = random_window(rng, skel, 5);
  double oracle = 0.0;
  for (std::size_t k = 0; k + 1 < 5; ++k) {
    const Pose a = apply_offsets(w.poses[k], w.e[k]);
    const Pose b = apply_offsets(w.poses[k + 1], w.e[k + 1]);
    for (int j = 0; j < kJointCount; ++j) {
      const Vec3 dt = chain_position(skel, bt, b, j) - chain_position(skel, bt, a, j);
      const Vec3 ds = chain_position(skel, bs, w.poses[k + 1], j) - chain_position(skel, bs, w.poses[k], j);
      oracle += (dt - ds).cwiseAbs().sum();
    }
  }
  EXPECT_NEAR(loss_style(skel, bt, bs, w.poses, w.e), oracle, 1e-10);
}

TEST(RetargetLoss, ConstraintTermsMatchOracles) {
  Rng rng(41);
  const Skeleton skel = default_skeleton();
  const ShapeParams bt = testing::random_beta(rng);
  const Camera cam = test_camera();
  const Window w = random_window(rng, skel, 1);
  double l3 = 0.0;
  double l2 = 0.0;
  const Pose p = apply_offsets(w.poses[0], w.e[0]);
  for (const Constraint& c : w.constraints) {
    const Vec3 x = chain_position(skel, bt, p, c.joint);
    if (c.kind == ConstraintKind::Position3D) {
      l3 += (x - c.position).cwiseAbs().sum();
    } else {
      // camera frame is (x, 1 - y, 4 - z) for test_camera()
      const double z = 4.0 - x.z();
      const Vec2 px(cam.intrinsics.fx * x.x() / z + cam.intrinsics.cx,
                    cam.intrinsics.fy * (1.0 - x.y()) / z + cam.intrinsics.cy);
      l2 += (px - c.pixel).cwiseAbs().sum();
    }
  }
  EXPECT_NEAR(loss_3d(skel, bt, w.poses[0], w.e[0], w.constraints), l3, 1e-10);
  EXPECT_NEAR(loss_2d(skel, bt, w.poses[0], w.e[0], w.constraints, cam), l2, 1e-7);
}

TEST(RetargetLoss, TotalCombinesTermsWithWeights) {
  Rng rng(42);
  const Skeleton skel = default_skeleton();
  const ShapeParams bs = testing::random_beta(rng);
  const ShapeParams bt = testing::random_beta(rng);
  const Window w = random_window(rng, skel, 4);
  RetargetConfig cfg;
  cfg.lambda1 = 2.0;
  cfg.lambda2 = 3.0;
  cfg.lambda3 = 0.5;
  const JointWeights jw = JointWeights::from_depth(skel);
  const RetargetObjective obj(skel, bs, bt, w.poses, w.constraints, test_camera(), jw, cfg);
  OffsetSequence x = OffsetSequence::zeros(4, false);
  x.e = w.e;
  const LossBreakdown b = obj.evaluate(x);

  double norm_sq = 0.0;
  double l3 = 0.0;
  double l2 = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      norm_sq += jw.w[j] * jw.w[j] * w.e[k][j].squaredNorm();
    }
    std::vector<Constraint> at_k;
    for (Constraint c : w.constraints) {
      if (c.frame == k) {
        at_k.push_back(c);
      }
    }
    l3 += loss_3d(skel, bt, w.poses[k], w.e[k], at_k);
    l2 += loss_2d(skel, bt, w.poses[k], w.e[k], at_k, test_camera());
  }
  const double style = loss_style(skel, bt, bs, w.poses, w.e);
  EXPECT_NEAR(b.offset_norm, std::sqrt(norm_sq), 1e-12);
  EXPECT_NEAR(b.style, style, 1e-10);
  EXPECT_NEAR(b.position3d, l3, 1e-10);
  EXPECT_NEAR(b.pixel2d, l2, 1e-7);
  EXPECT_NEAR(b.total, std::sqrt(norm_sq) + 2.0 * style + 3.0 * l3 + 0.5 * l2, 1e-6);
  EXPECT_DOUBLE_EQ(total_loss(obj, x), b.total);
}

TEST(RetargetLoss, GradientMatchesCentralDifferences) {
  Rng rng(43);
  const Skeleton skel = default_skeleton();
  for (int trial = 0; trial < 20; ++trial) {
    const ShapeParams bs = testing::random_beta(rng);
    const ShapeParams bt = testing::random_beta(rng);
    const Window w = random_window(rng, skel, 3);
    RetargetConfig cfg;
    cfg.optimize_root_translation = trial % 2 == 1;
    const RetargetObjective obj(skel, bs, bt, w.poses, w.constraints, test_camera(), JointWeights::from_depth(skel),
                                cfg);
    OffsetSequence x = OffsetSequence::zeros(3, cfg.optimize_root_translation);
    x.e = w.e;
    if (cfg.optimize_root_translation) {
      x.root_offsets = w.root;
    }
    const Eigen::VectorXd v = x.pack();
    ASSERT_EQ(v.size(), obj.dimension());
    const auto f = [&](const Eigen::VectorXd& y) { return obj.evaluate(y).total; };
    EXPECT_LT(testing::relative_error(loss_gradient(obj, x), testing::central_difference(f, v, 1e-7)), 1e-4);
  }
}

TEST(RetargetLoss, ZeroOffsetIsStationaryForEqualShapes) {
  Rng rng(45);
  const Skeleton skel = default_skeleton();
  for (int trial = 0; trial < 5; ++trial) {
    const ShapeParams b = testing::random_beta(rng);
    Window w = random_window(rng, skel, 6);
    const RetargetObjective obj(skel, b, b, w.poses, {}, std::nullopt, JointWeights::from_depth(skel), {});
    const OffsetSequence zero = OffsetSequence::zeros(6, false);
    EXPECT_LT(loss_gradient(obj, zero).norm(), 1e-8);
    EXPECT_EQ(obj.evaluate(zero).total, 0.0);
  }
}

TEST(JointWeights, RootAdjacentJointCostsMoreThanLeaf) {
  const Skeleton skel = default_skeleton();
  const JointWeights jw = JointWeights::from_depth(skel);
  const std::vector<Pose> poses(1);
  const RetargetObjective obj(skel, ShapeParams::zero(), ShapeParams::zero(), poses, {}, std::nullopt, jw, {});
  const auto penalty = [&](int joint) {
    OffsetSequence x = OffsetSequence::zeros(1, false);
    x.e[0][joint] = Vec3(0.0, 0.0, 0.1);
    return obj.evaluate(x).offset_norm;
  };
  for (int j = 0; j < kJointCount; ++j) {
    if (skel.parent(j) == skel.root()) {
      for (int leaf : skel.end_effectors()) {
        EXPECT_GT(penalty(j), penalty(leaf)) << j << " vs " << leaf;
      }
    }
  }
}

TEST(OffsetSequence, PackUnpackRoundTrip) {
  Rng rng(44);
  OffsetSequence s = OffsetSequence::zeros(3, true);
  for (auto& e : s.e) {
    for (auto& v : e) {
      v = testing::random_vec3(rng, 1.0);
    }
  }
  for (auto& r : s.root_offsets) {
    r = testing::random_vec3(rng, 1.0);
  }
  OffsetSequence t = OffsetSequence::zeros(3, true);
  t.unpack(s.pack());
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(t.root_offsets[k], s.root_offsets[k]);
    for (int j = 0; j < kJointCount; ++j) {
      EXPECT_EQ(t.e[k][j], s.e[k][j]);
    }
  }
}

TEST(WindowRanges, ShareOneOverlapFrameAndCoverTheMotion) {
  for (std::size_t n : {1u, 2u, 5u, 59u, 60u, 61u, 100u, 119u, 120u, 150u, 301u}) {
    for (std::size_t w : {2u, 10u, 60u}) {
      const auto r = window_ranges(n, w);
      ASSERT_FALSE(r.empty());
      EXPECT_EQ(r.front().first, 0u);
      EXPECT_EQ(r.back().last, n - 1);
      for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        EXPECT_EQ(r[i + 1].first, r[i].last);
        EXPECT_EQ(r[i].last - r[i].first + 1, w);
      }
      if (r.size() > 1) {
        const std::size_t tail = r.back().last - r.back().first + 1;
        EXPECT_GE(2 * tail, w);
        EXPECT_LE(tail, w + w / 2);
      }
    }
  }
  EXPECT_TRUE(window_ranges(0, 10).empty());
}

TEST(WindowRanges, ShortTailIsMerged) {
  const auto r = window_ranges(65, 60);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].last, 64u);
  const auto s = window_ranges(100, 60);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].first, 59u);
  EXPECT_EQ(s[1].last, 99u);
}

TEST(JointWeights, DepthWeightsRangeFromTwoToOne) {
  const Skeleton skel = default_skeleton();
  const JointWeights w = JointWeights::from_depth(skel);
  EXPECT_DOUBLE_EQ(w.w[skel.root()], 2.0);
  for (int j = 0; j < kJointCount; ++j) {
    EXPECT_DOUBLE_EQ(w.w[j], 1.0 + double(skel.max_depth() - skel.depth(j)) / skel.max_depth());
    if (skel.depth(j) == skel.max_depth()) {
      EXPECT_DOUBLE_EQ(w.w[j], 1.0);
    }
  }
}

Scenario scenario(const std::string& motion, double target_b0) {
  ScenarioSpec spec;
  spec.motion = motion;
  spec.target.beta[0] = target_b0;
  return generate(default_skeleton(), spec);
}

TEST(Retarget, EqualShapesWithoutConstraintsLeaveMotionUnchanged) {
  const Skeleton skel = default_skeleton();
  const Scenario sc = scenario("walk", 0.0);
  for (bool warm : {true, false}) {
    RetargetConfig cfg;
    cfg.warm_start = warm;
    const RetargetResult r = retarget_motion(skel, sc.source, ShapeParams::zero(), ShapeParams::zero(), {}, cfg);
    double worst = 0.0;
    for (std::size_t k = 0; k < sc.source.size(); ++k) {
      for (int j = 0; j < kJointCount; ++j) {
        worst = std::max(worst, (r.motion.frames[k].theta[j] - sc.source.frames[k].theta[j]).cwiseAbs().maxCoeff());
      }
    }
    EXPECT_LT(worst, 1e-4) << "warm_start=" << warm;
  }
}

TEST(Retarget, DirectTransferCopiesAngles) {
  const Scenario sc = scenario("jump", -2.0);
  const Motion d = direct_transfer(sc.source);
  ASSERT_EQ(d.size(), sc.source.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    EXPECT_EQ(d.frames[k], sc.source.frames[k]);
  }
}

TEST(Retarget, ReachesSynthConstraintsOnShorterTarget) {
  const Skeleton skel = default_skeleton();
  const Scenario sc = scenario("pickup-box", -2.0);
  ShapeParams bt;
  bt.beta[0] = -2.0;
  RetargetConfig cfg;
  cfg.optimize_root_translation = true;
  const RetargetResult r = retarget_motion(skel, sc.source, ShapeParams::zero(), bt, sc.constraints, cfg);
  double worst = 0.0;
  for (const auto& res : constraint_residuals(skel, bt, r.motion, sc.constraints)) {
    worst = std::max(worst, res.residual);
    EXPECT_EQ(res.kind, ConstraintKind::Position3D);
  }
  EXPECT_LT(worst, 0.01);
  const double after = end_effector_error(r.motion, skel, bt, sc.constraints);
  const double before = end_effector_error(direct_transfer(sc.source), skel, bt, sc.constraints);
  EXPECT_LT(after, 0.25 * before);
  for (const WindowReport& w : r.windows) {
    EXPECT_LE(w.final_loss, w.initial_loss);
  }
}

TEST(Retarget, SeamFramesStayContinuous) {
  const Skeleton skel = default_skeleton();
  ScenarioSpec spec;
  spec.motion = "walk";
  spec.duration = 7.0;
  spec.target.beta[0] = 2.5;
  const Scenario sc = generate(skel, spec);
  RetargetConfig cfg;
  cfg.optimize_root_translation = true;
  const RetargetResult r = retarget_motion(skel, sc.source, ShapeParams::zero(), spec.target, sc.constraints, cfg);
  ASSERT_GT(r.windows.size(), 2u);
  const auto pos = motion_positions(skel, spec.target, r.motion);
  const auto truth = motion_positions(skel, spec.target, sc.target);
  // Frame-to-frame velocity error at each seam is no worse than the
  // worst one seen away from seams.
  std::vector<bool> seam(pos.size(), false);
  for (std::size_t w = 1; w < r.windows.size(); ++w) {
    seam[r.windows[w].range.first] = true;
  }
  double worst_seam = 0.0;
  double worst_inner = 0.0;
  for (std::size_t k = 1; k + 1 < pos.size(); ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      const double err = ((pos[k + 1][j] - pos[k][j]) - (truth[k + 1][j] - truth[k][j])).norm() +
                         ((pos[k][j] - pos[k - 1][j]) - (truth[k][j] - truth[k - 1][j])).norm();
      (seam[k] ? worst_seam : worst_inner) = std::max(seam[k] ? worst_seam : worst_inner, err);
    }
  }
  EXPECT_LE(worst_seam, std::max(worst_inner, 1e-3));
}

TEST(Retarget, ConstantVelocityMotionHasNoSeamJump) {
  const Skeleton skel = default_skeleton();
  Motion m;
  m.fps = 30.0;
  for (int k = 0; k < 100; ++k) {
    Pose p;
    const double t = k / 30.0;
    p.root_t = Vec3(0.5 * t, 0.9, 0.0);
    for (int j = 0; j < kJointCount; ++j) {
      p.theta[j] = Vec3(0.2 * t, 0.05 * j * t, -0.1 * t);
    }
    m.frames.push_back(p);
  }
  ShapeParams bt;
  bt.beta[0] = 2.5;
  ConstraintSet cs;
  cs.constraints.push_back({.frame = 10, .joint = joints::kLeftHand, .kind = ConstraintKind::Position3D,
                            .position = Vec3(0.9, 1.0, 0.2)});
  cs.constraints.push_back({.frame = 80, .joint = joints::kRightFoot, .kind = ConstraintKind::Position3D,
                            .position = Vec3(1.1, 0.0, 0.0)});
  const RetargetResult r = retarget_motion(skel, m, ShapeParams::zero(), bt, cs, {});
  ASSERT_EQ(r.windows.size(), 2u);
  const std::size_t seam = r.windows[1].range.first;
  const auto pos = motion_positions(skel, bt, r.motion);
  const auto step = [&](std::size_t k) {
    double s = 0.0;
    for (int j = 0; j < kJointCount; ++j) {
      s = std::max(s, (pos[k + 1][j] - pos[k][j]).norm());
    }
    return s;
  };
  double inner = 0.0;
  for (std::size_t k = 0; k + 1 < pos.size(); ++k) {
    if (k + 1 != seam && k != seam) {
      inner = std::max(inner, step(k));
    }
  }
  EXPECT_LE(step(seam - 1), 3.0 * inner);
  EXPECT_LE(step(seam), 3.0 * inner);
}

TEST(Retarget, HeavierConstraintWeightNeverIncreasesResidual) {
  const Skeleton skel = default_skeleton();
  const Scenario sc = scenario("jump", 2.5);
  ShapeParams bt;
  bt.beta[0] = 2.5;
  const auto worst = [&](double lambda2) {
    RetargetConfig cfg;
    cfg.iterations = 40;
    cfg.lambda2 = lambda2;
    const RetargetResult r = retarget_motion(skel, sc.source, ShapeParams::zero(), bt, sc.constraints, cfg);
    double w = 0.0;
    for (const auto& res : constraint_residuals(skel, bt, r.motion, sc.constraints)) {
      w = std::max(w, res.residual);
    }
    return w;
  };
  EXPECT_LE(worst(10.0), worst(1.0));
}

TEST(Retarget, RepeatedRunsGiveIdenticalLossTraces) {
  const Skeleton skel = default_skeleton();
  const Scenario sc = scenario("touch-cone", -2.0);
  ShapeParams bt;
  bt.beta[0] = -2.0;
  RetargetConfig cfg;
  cfg.iterations = 30;
  const RetargetResult a = retarget_motion(skel, sc.source, ShapeParams::zero(), bt, sc.constraints, cfg);
  const RetargetResult b = retarget_motion(skel, sc.source, ShapeParams::zero(), bt, sc.constraints, cfg);
  ASSERT_EQ(a.windows.size(), b.windows.size());
  for (std::size_t w = 0; w < a.windows.size(); ++w) {
    EXPECT_EQ(a.windows[w].loss_trace, b.windows[w].loss_trace);
  }
  for (std::size_t k = 0; k < a.motion.size(); ++k) {
    EXPECT_EQ(a.motion.frames[k], b.motion.frames[k]);
  }
}

TEST(Retarget, TwoDimensionalConstraintsNeedACamera) {
  const Skeleton skel = default_skeleton();
  const Scenario sc = scenario("touch-cone", -2.0);
  ConstraintSet no_cam = sc.constraints;
  ASSERT_TRUE(no_cam.has_pixel_constraints());
  no_cam.camera.reset();
  EXPECT_THROW(no_cam.validate(skel, sc.source.size()), InputError);
  EXPECT_THROW(retarget_motion(skel, sc.source, ShapeParams::zero(), ShapeParams::zero(), no_cam, {}), InputError);
}

TEST(Retarget, ConstraintValidation) {
  const Skeleton skel = default_skeleton();
  ConstraintSet set;
  set.constraints.push_back({.frame = 0, .joint = joints::kLeftKnee});
  EXPECT_THROW(set.validate(skel, 10), InputError);
  set.constraints[0].joint = joints::kLeftHand;
  set.constraints[0].frame = 10;
  EXPECT_THROW(set.validate(skel, 10), InputError);
  set.constraints[0].frame = 9;
  set.validate(skel, 10);
}

TEST(Retarget, ResidualsAreZeroOnGroundTruth) {
  const Skeleton skel = default_skeleton();
  for (const std::string& t : synth_templates()) {
    const Scenario sc = scenario(t, 2.5);
    ShapeParams bt;
    bt.beta[0] = 2.5;
    for (const auto& r : constraint_residuals(skel, bt, sc.target, sc.constraints)) {
      EXPECT_LT(r.residual, 1e-9) << t;
    }
  }
}

} // namespace
} // namespace rtk
