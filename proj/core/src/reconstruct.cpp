#include "rtk/reconstruct.hpp"

#include "rtk/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rtk {

namespace {

constexpr double kMadToSigma = 1.4826;

double median(std::vector<double> v) {
  if (v.empty()) {
    return 0.0;
  }
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double hi = *mid;
  if (v.size() % 2 == 1) {
    return hi;
  }
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

Eigen::VectorXd pack_angles(const Pose& pose) {
  Eigen::VectorXd x(3 * kJointCount);
  for (int j = 0; j < kJointCount; ++j) {
    x.segment<3>(3 * j) = pose.theta[j];
  }
  return x;
}

void unpack_angles(const Eigen::VectorXd& x, Pose& pose) {
  for (int j = 0; j < kJointCount; ++j) {
    pose.theta[j] = x.segment<3>(3 * j);
  }
}

} // namespace

InlierMask::InlierMask(std::size_t frames) {
  std::array<bool, kJointCount> all;
  all.fill(true);
  rows_.assign(frames, all);
}

std::size_t InlierMask::outlier_count() const {
  std::size_t n = 0;
  for (const auto& row : rows_) {
    n += static_cast<std::size_t>(std::count(row.begin(), row.end(), false));
  }
  return n;
}

double SplineConfig::resolve_lambda(double fps) const {
  if (lambda >= 0.0) {
    return lambda;
  }
  return smoothing_lambda_for_cutoff(cutoff_hz, fps);
}

ShapeParams average_shape(std::span<const ShapeParams> betas) {
  if (betas.empty()) {
    throw InputError("average_shape: no shape coefficients given");
  }
  ShapeParams out;
  for (int i = 0; i < kShapeCount; ++i) {
    double sum = 0.0;
    for (const auto& b : betas) {
      sum += b.beta[i];
    }
    out.beta[i] = sum / static_cast<double>(betas.size());
  }
  return out;
}

SplineTrack fit_spline(
    const std::vector<JointPositions>& positions,
    double fps,
    const SplineConfig& config,
    const InlierMask* mask) {
  const std::size_t n = positions.size();
  if (n < 4) {
    throw InputError("fit_spline needs at least 4 frames, got " + std::to_string(n));
  }
  if (mask != nullptr && mask->frame_count() != n) {
    throw InputError("fit_spline: inlier mask does not match the motion length");
  }
  const double lambda = config.resolve_lambda(fps);
  std::vector<double> knots(n);
  std::iota(knots.begin(), knots.end(), 0.0);

  std::vector<SmoothingSpline> joints;
  joints.reserve(kJointCount);
  std::vector<double> weights(n);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), 3);
  for (int j = 0; j < kJointCount; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      values.row(static_cast<Eigen::Index>(k)) = positions[k][j].transpose();
      weights[k] = (mask == nullptr || mask->inlier(k, j)) ? 1.0 : 0.0;
    }
    joints.push_back(SmoothingSpline::fit(knots, values, weights, lambda));
  }
  return SplineTrack(std::move(joints), lambda);
}

SplineTrack fit_spline(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const SplineConfig& config,
    const InlierMask* mask) {
  motion.validate();
  return fit_spline(motion_positions(skel, beta, motion), motion.fps, config, mask);
}

std::vector<std::array<double, kJointCount>> spline_residuals(
    const std::vector<JointPositions>& positions,
    const SplineTrack& spline) {
  if (spline.frame_count() != positions.size()) {
    throw InputError("spline was fitted on a motion of different length");
  }
  const auto fitted = spline.evaluate_frames();
  std::vector<std::array<double, kJointCount>> out(positions.size());
  for (std::size_t k = 0; k < positions.size(); ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      out[k][j] = (positions[k][j] - fitted[k][j]).norm();
    }
  }
  return out;
}

InlierMask detect_outliers(
    const std::vector<JointPositions>& positions,
    const SplineTrack& spline,
    const OutlierConfig& config,
    const InlierMask* prior) {
  const auto residuals = spline_residuals(positions, spline);
  const std::size_t n = positions.size();
  InlierMask mask(n);
  std::vector<double> sample;
  sample.reserve(n);
  for (int j = 0; j < kJointCount; ++j) {
    sample.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (prior == nullptr || prior->inlier(k, j)) {
        sample.push_back(residuals[k][j]);
      }
    }
    const double med = median(sample);
    for (double& r : sample) {
      r = std::abs(r - med);
    }
    const double mad = median(sample);
    const double threshold = std::max(med + config.k * kMadToSigma * mad, config.floor);
    for (std::size_t k = 0; k < n; ++k) {
      if (residuals[k][j] > threshold) {
        mask.set(k, j, false);
      }
    }
  }
  return mask;
}

InlierMask detect_outliers(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const SplineTrack& spline,
    const OutlierConfig& config) {
  return detect_outliers(motion_positions(skel, beta, motion), spline, config);
}

RobustSpline fit_spline_robust(
    const std::vector<JointPositions>& positions,
    double fps,
    const SplineConfig& spline_config,
    const OutlierConfig& outlier_config) {
  RobustSpline out;
  out.mask = InlierMask(positions.size());
  out.spline = fit_spline(positions, fps, spline_config);
  for (int round = 1; round <= std::max(1, outlier_config.max_rounds); ++round) {
    InlierMask next = detect_outliers(positions, out.spline, outlier_config, round == 1 ? nullptr : &out.mask);
    out.rounds = round;
    if (next == out.mask) {
      break;
    }
    out.mask = std::move(next);
    out.spline = fit_spline(positions, fps, spline_config, &out.mask);
  }
  return out;
}

std::array<bool, kJointCount> anchored_angles(const Skeleton& skel, const std::array<bool, kJointCount>& mask_row) {
  std::array<bool, kJointCount> out;
  for (int j = 0; j < kJointCount; ++j) {
    out[j] = std::all_of(skel.children(j).begin(), skel.children(j).end(), [&](int c) { return mask_row[c]; });
  }
  return out;
}

double regularization_cost(
    const Skeleton& skel,
    const BoneOffsets& offsets,
    const Pose& estimate,
    const Pose& original,
    const std::array<bool, kJointCount>& anchored,
    const JointPositions& target,
    double gamma,
    Eigen::VectorXd* grad) {
  double anchor_sq = 0.0;
  for (int j = 0; j < kJointCount; ++j) {
    if (anchored[j]) {
      anchor_sq += (estimate.theta[j] - original.theta[j]).squaredNorm();
    }
  }
  const JointPoses poses = forward_kinematics(skel, offsets, estimate);
  std::array<Vec3, kJointCount> residual;
  double pos_sq = 0.0;
  for (int j = 0; j < kJointCount; ++j) {
    residual[j] = poses[j].translation - target[j];
    pos_sq += residual[j].squaredNorm();
  }
  const double anchor = std::sqrt(anchor_sq);
  const double pos = std::sqrt(pos_sq);

  if (grad != nullptr) {
    grad->setZero(3 * kJointCount);
    // Norms are not differentiable at zero; their subgradient 0 is used.
    if (anchor > 0.0) {
      for (int j = 0; j < kJointCount; ++j) {
        if (anchored[j]) {
          grad->segment<3>(3 * j) = (estimate.theta[j] - original.theta[j]) / anchor;
        }
      }
    }
    if (pos > 0.0 && gamma > 0.0) {
      std::array<Vec3, kJointCount> g;
      for (int j = 0; j < kJointCount; ++j) {
        g[j] = gamma * residual[j] / pos;
      }
      const PoseGradient pg = backpropagate_positions(skel, estimate, poses, g);
      for (int j = 0; j < kJointCount; ++j) {
        grad->segment<3>(3 * j) += pg.theta[j];
      }
    }
  }
  return anchor + gamma * pos;
}

RegularizeResult regularize_motion(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const SplineTrack& spline,
    const InlierMask& mask,
    const RegularizeConfig& config) {
  motion.validate();
  if (!(config.gamma >= 0.0) || !std::isfinite(config.gamma)) {
    throw InputError("regularization gamma must be finite and non-negative");
  }
  if (spline.frame_count() != motion.size() || mask.frame_count() != motion.size()) {
    throw InputError("spline or inlier mask does not match the motion length");
  }
  const BoneOffsets offsets = bone_offsets(skel, beta);
  const auto targets = spline.evaluate_frames();

  RegularizeResult out;
  out.motion.fps = motion.fps;
  out.motion.frames.reserve(motion.size());
  out.cost_before.reserve(motion.size());
  out.cost_after.reserve(motion.size());
  for (std::size_t k = 0; k < motion.size(); ++k) {
    const Pose& original = motion.frames[k];
    const auto anchored = anchored_angles(skel, mask.row(k));
    Pose work = original;
    const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      unpack_angles(x, work);
      return regularization_cost(skel, offsets, work, original, anchored, targets[k], config.gamma, &g);
    };
    AdamResult res;
    try {
      res = minimize_adam(objective, pack_angles(original), config.optimizer);
    } catch (const NumericalError& e) {
      throw NumericalError("regularize_motion: frame " + std::to_string(k) + ": " + e.what());
    }
    Pose result = original;
    unpack_angles(res.x, result);
    out.motion.frames.push_back(result);
    out.cost_before.push_back(res.initial_loss);
    out.cost_after.push_back(res.final_loss);
  }
  return out;
}

Motion regularize_motion(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const SplineTrack& spline,
    const InlierMask& mask,
    double gamma) {
  RegularizeConfig config;
  config.gamma = gamma;
  return regularize_motion(motion, skel, beta, spline, mask, config).motion;
}

ReconstructResult reconstruct_motion(
    const Motion& motion,
    const Skeleton& skel,
    std::span<const ShapeParams> frame_betas,
    const ShapeParams& fallback_beta,
    const ReconstructConfig& config) {
  motion.validate();
  if (!frame_betas.empty() && frame_betas.size() != motion.size()) {
    throw InputError("per-frame shape estimates: got " + std::to_string(frame_betas.size()) + " for " +
                     std::to_string(motion.size()) + " frames");
  }
  ReconstructResult out;
  out.beta = frame_betas.empty() ? fallback_beta : average_shape(frame_betas);
  out.beta.validate();

  const auto positions = motion_positions(skel, out.beta, motion);
  RobustSpline robust = fit_spline_robust(positions, motion.fps, config.spline, config.outliers);
  const auto residuals = spline_residuals(positions, robust.spline);
  for (std::size_t k = 0; k < motion.size(); ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      if (!robust.mask.inlier(k, j)) {
        out.outliers.push_back({k, j, residuals[k][j]});
      }
    }
  }

  RegularizeResult reg = regularize_motion(motion, skel, out.beta, robust.spline, robust.mask, config.regularize);
  out.motion = std::move(reg.motion);
  out.cost_before = std::accumulate(reg.cost_before.begin(), reg.cost_before.end(), 0.0);
  out.cost_after = std::accumulate(reg.cost_after.begin(), reg.cost_after.end(), 0.0);
  out.spline = std::move(robust.spline);
  out.mask = std::move(robust.mask);
  out.robust_rounds = robust.rounds;

  const auto after = motion_positions(skel, out.beta, out.motion);
  double disp_sq = 0.0;
  double spread_sq = 0.0;
  for (std::size_t k = 0; k < motion.size(); ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      disp_sq += (after[k][j] - positions[k][j]).squaredNorm();
      spread_sq += (positions[k][j] - positions[k][skel.root()]).squaredNorm();
    }
  }
  out.relative_motion_change = spread_sq > 0.0 ? std::sqrt(disp_sq / spread_sq) : 0.0;
  return out;
}

} // namespace rtk
