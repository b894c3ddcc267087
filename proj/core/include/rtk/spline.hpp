#pragma once

#include "rtk/skeleton.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace rtk {

// Natural cubic smoothing spline shared by several channels. Minimizes
//   sum_i w_i |y_i - g(t_i)|^2 + lambda * integral |g''(t)|^2
// over natural cubic splines with knots at t_i. Zero weights drop a sample
// (the curve bridges it); lambda = 0 interpolates.
class SmoothingSpline {
 public:
  SmoothingSpline() = default;

  // values: one row per knot, one column per channel. Requires >= 4 knots,
  // strictly increasing. Throws NumericalError if the system is singular
  // (e.g. lambda = 0 with a zero weight, or fewer than two weighted samples).
  static SmoothingSpline fit(
      std::span<const double> knots,
      const Eigen::MatrixXd& values,
      std::span<const double> weights,
      double lambda);

  Eigen::VectorXd evaluate(double t) const;
  double evaluate(double t, Eigen::Index channel) const;

  const std::vector<double>& knots() const {
    return knots_;
  }
  // Fitted values at the knots.
  const Eigen::MatrixXd& knot_values() const {
    return values_;
  }
  // Second derivatives at the knots; zero at both ends.
  const Eigen::MatrixXd& second_derivatives() const {
    return second_;
  }

 private:
  std::vector<double> knots_;
  Eigen::MatrixXd values_;
  Eigen::MatrixXd second_;
};

// Smoothing weight (knots in frame units, unit sample weights) whose
// frequency response is 1/2 at cutoff_hz for a signal sampled at fps.
// Returns 0 when cutoff_hz is at or beyond Nyquist.
double smoothing_lambda_for_cutoff(double cutoff_hz, double fps);

// Gain of the uniform-knot smoothing spline at frequency `hz`.
double smoothing_response(double lambda, double hz, double fps);

// Per-joint smoothing splines over FK joint positions; knots are frame
// indices.
class SplineTrack {
 public:
  SplineTrack() = default;
  SplineTrack(std::vector<SmoothingSpline> joints, double lambda);

  JointPositions evaluate(double frame) const;
  std::vector<JointPositions> evaluate_frames() const;

  std::size_t frame_count() const;
  double lambda() const {
    return lambda_;
  }
  const SmoothingSpline& joint(int j) const {
    return joints_[j];
  }

 private:
  std::vector<SmoothingSpline> joints_;
  double lambda_ = 0.0;
};

} // namespace rtk
