#include "rtk/spline.hpp"

#include "rtk/error.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rtk {

SmoothingSpline SmoothingSpline::fit(
    std::span<const double> knots,
    const Eigen::MatrixXd& values,
    std::span<const double> weights,
    double lambda) {
  const auto n = static_cast<Eigen::Index>(knots.size());
  if (n < 4) {
    throw InputError("smoothing spline needs at least 4 knots, got " + std::to_string(n));
  }
  if (values.rows() != n || static_cast<Eigen::Index>(weights.size()) != n) {
    throw InputError("smoothing spline: knots, values and weights disagree in length");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InputError("smoothing spline: lambda must be finite and non-negative");
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (!(knots[i + 1] > knots[i])) {
      throw InputError("smoothing spline: knots must be strictly increasing");
    }
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InputError("smoothing spline: weights must be finite and non-negative");
    }
  }

  // Unknowns: g (n values) then the n-2 interior second derivatives. Rows:
  //   W g + lambda Q gamma = W y
  //   Q^T g - R gamma = 0
  const Eigen::Index m = n - 2;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n + 6 * m + 3 * m));
  for (Eigen::Index i = 0; i < n; ++i) {
    trips.emplace_back(i, i, weights[i]);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    // Column j of Q touches knots j, j+1, j+2.
    const double h0 = knots[j + 1] - knots[j];
    const double h1 = knots[j + 2] - knots[j + 1];
    const double q[3] = {1.0 / h0, -1.0 / h0 - 1.0 / h1, 1.0 / h1};
    for (int r = 0; r < 3; ++r) {
      trips.emplace_back(j + r, n + j, lambda * q[r]);
      trips.emplace_back(n + j, j + r, q[r]);
    }
    trips.emplace_back(n + j, n + j, -(h0 + h1) / 3.0);
    if (j + 1 < m) {
      trips.emplace_back(n + j, n + j + 1, -h1 / 6.0);
      trips.emplace_back(n + j + 1, n + j, -h1 / 6.0);
    }
  }
  Eigen::SparseMatrix<double> a(n + m, n + m);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw NumericalError("smoothing spline system is singular");
  }
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + m, values.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs.row(i) = weights[i] * values.row(i);
  }
  const Eigen::MatrixXd sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite()) {
    throw NumericalError("smoothing spline solve failed");
  }

  SmoothingSpline s;
  s.knots_.assign(knots.begin(), knots.end());
  s.values_ = sol.topRows(n);
  s.second_ = Eigen::MatrixXd::Zero(n, values.cols());
  s.second_.middleRows(1, m) = sol.bottomRows(m);
  return s;
}

double SmoothingSpline::evaluate(double t, Eigen::Index channel) const {
  const auto n = knots_.size();
  if (t <= knots_.front() || t >= knots_.back()) {
    // Natural end conditions: linear continuation beyond the end knots.
    const bool front = t <= knots_.front();
    const std::size_t i = front ? 0 : n - 2;
    const double h = knots_[i + 1] - knots_[i];
    const double g0 = values_(i, channel);
    const double g1 = values_(i + 1, channel);
    const double c0 = second_(i, channel);
    const double c1 = second_(i + 1, channel);
    if (front) {
      const double slope = (g1 - g0) / h - h / 6.0 * (2.0 * c0 + c1);
      return g0 + (t - knots_.front()) * slope;
    }
    const double slope = (g1 - g0) / h + h / 6.0 * (c0 + 2.0 * c1);
    return g1 + (t - knots_.back()) * slope;
  }
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  const double t0 = knots_[i];
  const double t1 = knots_[i + 1];
  const double h = t1 - t0;
  const double a = t - t0;
  const double b = t1 - t;
  return (a * values_(i + 1, channel) + b * values_(i, channel)) / h -
      a * b / 6.0 * ((1.0 + a / h) * second_(i + 1, channel) + (1.0 + b / h) * second_(i, channel));
}

Eigen::VectorXd SmoothingSpline::evaluate(double t) const {
  Eigen::VectorXd out(values_.cols());
  for (Eigen::Index c = 0; c < values_.cols(); ++c) {
    out[c] = evaluate(t, c);
  }
  return out;
}

double smoothing_lambda_for_cutoff(double cutoff_hz, double fps) {
  if (!(cutoff_hz > 0.0) || !(fps > 0.0)) {
    throw InputError("spline cutoff and fps must be positive");
  }
  if (cutoff_hz >= fps / 2.0) {
    return 0.0;
  }
  // Uniform unit-spaced knots: the smoother acts as 1 / (1 + lambda * S(w))
  // with S(w) = 6 (2 - 2 cos w)^2 / (4 + 2 cos w).
  const double w = 2.0 * std::numbers::pi * cutoff_hz / fps;
  const double c = std::cos(w);
  return (4.0 + 2.0 * c) / (6.0 * (2.0 - 2.0 * c) * (2.0 - 2.0 * c));
}

double smoothing_response(double lambda, double hz, double fps) {
  const double w = 2.0 * std::numbers::pi * hz / fps;
  const double c = std::cos(w);
  return 1.0 / (1.0 + lambda * 6.0 * (2.0 - 2.0 * c) * (2.0 - 2.0 * c) / (4.0 + 2.0 * c));
}

SplineTrack::SplineTrack(std::vector<SmoothingSpline> joints, double lambda)
    : joints_(std::move(joints)), lambda_(lambda) {
  if (joints_.size() != kJointCount) {
    throw InputError("spline track needs one spline per joint");
  }
}

JointPositions SplineTrack::evaluate(double frame) const {
  JointPositions out;
  for (int j = 0; j < kJointCount; ++j) {
    out[j] = joints_[j].evaluate(frame);
  }
  return out;
}

std::vector<JointPositions> SplineTrack::evaluate_frames() const {
  std::vector<JointPositions> out(frame_count());
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (int j = 0; j < kJointCount; ++j) {
      out[k][j] = joints_[j].knot_values().row(static_cast<Eigen::Index>(k)).transpose();
    }
  }
  return out;
}

std::size_t SplineTrack::frame_count() const {
  return joints_.empty() ? 0 : joints_.front().knots().size();
}

} // namespace rtk
