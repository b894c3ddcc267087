#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace rtk {

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  int iterations = 300;
  // Reject steps that increase the loss, halving the step up to max_halvings
  // times before leaving the iterate in place.
  bool monotone = false;
  int max_halvings = 20;

  void validate() const;
};

// First-order adaptive-moment update with bias correction.
class AdamOptimizer {
 public:
  AdamOptimizer(Eigen::Index dim, const AdamOptions& options);

  // Returns the proposed step (to be added to x) for the given gradient and
  // advances the moment estimates.
  Eigen::VectorXd step(const Eigen::VectorXd& grad);

  int iteration() const {
    return t_;
  }

 private:
  AdamOptions options_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int t_ = 0;
};

// Loss and gradient at x; grad is resized by the callee.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct AdamResult {
  Eigen::VectorXd x;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  // Loss at each iterate, starting with x0; size iterations + 1.
  std::vector<double> trace;
  int best_iteration = 0;
};

// Runs options.iterations steps and returns the lowest-loss iterate seen, so
// final_loss <= initial_loss always. Throws NumericalError (naming the
// iteration) on a non-finite loss or gradient.
AdamResult minimize_adam(const Objective& objective, Eigen::VectorXd x0, const AdamOptions& options);

} // namespace rtk
