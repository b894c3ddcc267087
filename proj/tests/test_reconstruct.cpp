#include "test_support.hpp"

#include "rtk/error.hpp"
#include "rtk/reconstruct.hpp"
#include "rtk/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace rtk {
namespace {

using testing::Rng;

TEST(AverageShape, IsTheComponentwiseMean) {
  Rng rng(30);
  std::vector<ShapeParams> betas;
  for (int i = 0; i < 7; ++i) {
    betas.push_back(testing::random_beta(rng, 2.0));
  }
  const ShapeParams avg = average_shape(betas);
  for (int b = 0; b < kShapeCount; ++b) {
    double s = 0.0;
    for (const auto& beta : betas) {
      s += beta.beta[b];
    }
    EXPECT_NEAR(avg.beta[b], s / 7.0, 1e-15);
  }
  EXPECT_THROW(average_shape({}), InputError);
}

std::vector<JointPositions> random_walk_positions(Rng& rng, std::size_t n) {
  std::vector<JointPositions> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      out[k][j] = Vec3(std::sin(0.1 * k + j), std::cos(0.07 * k * (1 + j % 3)), 0.02 * k) +
                  testing::random_vec3(rng, 0.002);
    }
  }
  return out;
}

TEST(FitSpline, TrackMatchesPerJointSplines) {
  Rng rng(31);
  const auto pos = random_walk_positions(rng, 40);
  const SplineConfig cfg;
  const SplineTrack track = fit_spline(pos, 30.0, cfg);
  ASSERT_EQ(track.frame_count(), 40u);
  EXPECT_DOUBLE_EQ(track.lambda(), smoothing_lambda_for_cutoff(5.0, 30.0));
  std::vector<double> knots(40);
  for (int k = 0; k < 40; ++k) {
    knots[k] = k;
  }
  for (int j : {0, 7, 23}) {
    Eigen::MatrixXd y(40, 3);
    for (int k = 0; k < 40; ++k) {
      y.row(k) = pos[k][j].transpose();
    }
    const SmoothingSpline s = SmoothingSpline::fit(knots, y, std::vector<double>(40, 1.0), track.lambda());
    for (int k = 0; k < 40; ++k) {
      EXPECT_LT((track.evaluate(k)[j] - s.knot_values().row(k).transpose()).norm(), 1e-12);
    }
  }
}

TEST(FitSpline, ExplicitLambdaOverridesCutoff) {
  SplineConfig cfg;
  cfg.lambda = 0.25;
  EXPECT_DOUBLE_EQ(cfg.resolve_lambda(30.0), 0.25);
  cfg.lambda = -1.0;
  EXPECT_DOUBLE_EQ(cfg.resolve_lambda(60.0), smoothing_lambda_for_cutoff(5.0, 60.0));
}

// Threshold rule recomputed from the residuals with a sort-based median.
InlierMask outlier_oracle(const std::vector<std::array<double, kJointCount>>& res, const OutlierConfig& cfg) {
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  InlierMask mask(res.size());
  for (int j = 0; j < kJointCount; ++j) {
    std::vector<double> col;
    for (const auto& row : res) {
      col.push_back(row[j]);
    }
    const double med = median(col);
    std::vector<double> dev;
    for (double r : col) {
      dev.push_back(std::abs(r - med));
    }
    const double thr = std::max(med + cfg.k * 1.4826 * median(dev), cfg.floor);
    for (std::size_t k = 0; k < res.size(); ++k) {
      mask.set(k, j, !(res[k][j] > thr));
    }
  }
  return mask;
}

TEST(DetectOutliers, MatchesMedianMadRule) {
  Rng rng(32);
  auto pos = random_walk_positions(rng, 60);
  pos[10][3] += Vec3(0.2, 0.0, 0.0);
  pos[41][17] += Vec3(0.0, -0.1, 0.05);
  const SplineTrack track = fit_spline(pos, 30.0, SplineConfig{});
  for (double floor : {0.0, 0.005}) {
    OutlierConfig cfg;
    cfg.floor = floor;
    const InlierMask mask = detect_outliers(pos, track, cfg);
    EXPECT_EQ(mask, outlier_oracle(spline_residuals(pos, track), cfg));
    EXPECT_FALSE(mask.inlier(10, 3));
    EXPECT_FALSE(mask.inlier(41, 17));
  }
}

TEST(DetectOutliers, FloorSuppressesFlagsOnCleanData) {
  std::vector<JointPositions> pos(30);
  for (std::size_t k = 0; k < pos.size(); ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      pos[k][j] = Vec3(0.01 * k, 0.0, j);
    }
  }
  const SplineTrack track = fit_spline(pos, 30.0, SplineConfig{});
  EXPECT_EQ(detect_outliers(pos, track, OutlierConfig{}).outlier_count(), 0u);
}

TEST(AnchoredAngles, FollowChildFlags) {
  const Skeleton skel = default_skeleton();
  std::array<bool, kJointCount> row;
  row.fill(true);
  row[joints::kLeftFoot] = false;
  const auto anchored = anchored_angles(skel, row);
  EXPECT_FALSE(anchored[joints::kLeftAnkle]);
  EXPECT_TRUE(anchored[joints::kLeftKnee]);
  EXPECT_TRUE(anchored[joints::kLeftFoot]);
  EXPECT_EQ(std::count(anchored.begin(), anchored.end(), false), 1);
}

TEST(RegularizationCost, GradientMatchesFiniteDifference) {
  Rng rng(33);
  const Skeleton skel = default_skeleton();
  const BoneOffsets off = bone_offsets(skel, testing::random_beta(rng));
  for (int trial = 0; trial < 10; ++trial) {
    const Pose original = testing::random_pose(rng, 0.8);
    Pose estimate = original;
    for (auto& t : estimate.theta) {
      t += testing::random_vec3(rng, 0.2);
    }
    JointPositions target = joint_positions(forward_kinematics(skel, off, original));
    for (auto& p : target) {
      p += testing::random_vec3(rng, 0.05);
    }
    std::array<bool, kJointCount> anchored;
    for (auto& a : anchored) {
      a = testing::uniform(rng, 0.0, 1.0) > 0.3;
    }
    const double gamma = 10.0;
    const auto f = [&](const Eigen::VectorXd& x) {
      Pose p = estimate;
      for (int j = 0; j < kJointCount; ++j) {
        p.theta[j] = x.segment<3>(3 * j);
      }
      return regularization_cost(skel, off, p, original, anchored, target, gamma);
    };
    Eigen::VectorXd x(3 * kJointCount);
    for (int j = 0; j < kJointCount; ++j) {
      x.segment<3>(3 * j) = estimate.theta[j];
    }
    Eigen::VectorXd g;
    const double c = regularization_cost(skel, off, estimate, original, anchored, target, gamma, &g);
    EXPECT_DOUBLE_EQ(c, f(x));
    EXPECT_LT(testing::relative_error(g, testing::central_difference(f, x, 1e-6)), 1e-6);
  }
}

TEST(RegularizationCost, MatchesDefinition) {
  Rng rng(34);
  const Skeleton skel = default_skeleton();
  const BoneOffsets off = bone_offsets(skel, ShapeParams::zero());
  const Pose original = testing::random_pose(rng, 0.5);
  const Pose estimate = testing::random_pose(rng, 0.5);
  JointPositions target;
  for (auto& p : target) {
    p = testing::random_vec3(rng, 1.0);
  }
  std::array<bool, kJointCount> anchored;
  anchored.fill(true);
  anchored[5] = false;
  double angle_sq = 0.0;
  for (int j = 0; j < kJointCount; ++j) {
    if (anchored[j]) {
      angle_sq += (estimate.theta[j] - original.theta[j]).squaredNorm();
    }
  }
  const auto fk = testing::chain_fk(skel, ShapeParams::zero(), estimate);
  double pos_sq = 0.0;
  for (int j = 0; j < kJointCount; ++j) {
    pos_sq += (fk[j].topRightCorner<3, 1>() - target[j]).squaredNorm();
  }
  EXPECT_NEAR(regularization_cost(skel, off, estimate, original, anchored, target, 3.0),
              std::sqrt(angle_sq) + 3.0 * std::sqrt(pos_sq), 1e-12);
}

Scenario walk(double duration, double noise, int spikes, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.motion = "walk";
  spec.duration = duration;
  spec.noise_sigma = noise;
  spec.spike_count = spikes;
  spec.seed = seed;
  return generate(default_skeleton(), spec);
}

TEST(Reconstruct, CleanWalkIsLeftAlone) {
  const Scenario sc = walk(4.0, 0.0, 0, 1);
  const ReconstructResult r =
      reconstruct_motion(sc.source, default_skeleton(), {}, ShapeParams::zero(), ReconstructConfig{});
  EXPECT_TRUE(r.outliers.empty());
  EXPECT_LT(r.relative_motion_change, 0.01);
  EXPECT_LE(r.cost_after, r.cost_before + 1e-12);
  ASSERT_EQ(r.motion.size(), sc.source.size());
  for (std::size_t k = 0; k < r.motion.size(); ++k) {
    EXPECT_EQ(r.motion.frames[k].root_t, sc.source.frames[k].root_t);
  }
}

TEST(Reconstruct, FlagsExactlyTheInjectedSpikes) {
  const Scenario sc = walk(6.0, 0.0, 5, 7);
  ASSERT_EQ(sc.spikes.size(), 5u);
  const ReconstructResult r =
      reconstruct_motion(sc.source, default_skeleton(), {}, ShapeParams::zero(), ReconstructConfig{});
  std::set<std::pair<std::size_t, int>> injected;
  for (const InjectedSpike& s : sc.spikes) {
    injected.insert({s.frame, s.leaf_joint});
  }
  std::set<std::pair<std::size_t, int>> flagged;
  for (const OutlierEntry& o : r.outliers) {
    flagged.insert({o.frame, o.joint});
  }
  EXPECT_EQ(flagged, injected);
}

TEST(Reconstruct, RepairsSpikedAngles) {
  const Scenario sc = walk(6.0, 0.0, 5, 11);
  const ReconstructResult r =
      reconstruct_motion(sc.source, default_skeleton(), {}, ShapeParams::zero(), ReconstructConfig{});
  const auto clean = motion_positions(default_skeleton(), ShapeParams::zero(), sc.clean_source);
  const auto spiked = motion_positions(default_skeleton(), ShapeParams::zero(), sc.source);
  const auto fixed = motion_positions(default_skeleton(), ShapeParams::zero(), r.motion);
  for (const InjectedSpike& s : sc.spikes) {
    const double before = (spiked[s.frame][s.leaf_joint] - clean[s.frame][s.leaf_joint]).norm();
    const double after = (fixed[s.frame][s.leaf_joint] - clean[s.frame][s.leaf_joint]).norm();
    EXPECT_LT(after, 0.25 * before) << "spike at frame " << s.frame;
  }
}

TEST(Reconstruct, UsesPerFrameShapeAverage) {
  const Scenario sc = walk(2.0, 0.0, 0, 3);
  std::vector<ShapeParams> betas(sc.source.size());
  for (std::size_t k = 0; k < betas.size(); ++k) {
    betas[k].beta[0] = (k % 2 == 0) ? 0.2 : -0.1;
  }
  const ReconstructResult r = reconstruct_motion(sc.source, default_skeleton(), betas, ShapeParams::zero(), {});
  EXPECT_NEAR(r.beta.beta[0], average_shape(betas).beta[0], 1e-15);
  betas.pop_back();
  EXPECT_THROW(reconstruct_motion(sc.source, default_skeleton(), betas, ShapeParams::zero(), {}), InputError);
}

TEST(Reconstruct, TooShortMotionIsRejected) {
  Motion m;
  m.frames.resize(3);
  EXPECT_THROW(reconstruct_motion(m, default_skeleton(), {}, ShapeParams::zero(), {}), InputError);
}

} // namespace
} // namespace rtk
