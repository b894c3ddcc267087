#include "rtk/adam.hpp"

#include "rtk/error.hpp"

#include <cmath>
#include <string>

namespace rtk {

void AdamOptions::validate() const {
  if (!(learning_rate > 0.0) || !(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) ||
      !(epsilon > 0.0) || iterations < 0) {
    throw InputError("invalid optimizer settings: learning rate, betas and epsilon must be positive "
                     "(betas below 1) and iterations non-negative");
  }
}

AdamOptimizer::AdamOptimizer(Eigen::Index dim, const AdamOptions& options)
    : options_(options), m_(Eigen::VectorXd::Zero(dim)), v_(Eigen::VectorXd::Zero(dim)) {
  options_.validate();
}

Eigen::VectorXd AdamOptimizer::step(const Eigen::VectorXd& grad) {
  ++t_;
  m_ = options_.beta1 * m_ + (1.0 - options_.beta1) * grad;
  v_ = options_.beta2 * v_ + (1.0 - options_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(options_.beta1, t_);
  const double c2 = 1.0 - std::pow(options_.beta2, t_);
  const Eigen::ArrayXd mhat = m_.array() / c1;
  const Eigen::ArrayXd vhat = v_.array() / c2;
  return (-options_.learning_rate * mhat / (vhat.sqrt() + options_.epsilon)).matrix();
}

namespace {

double checked(double loss, const Eigen::VectorXd& grad, int iteration) {
  if (!std::isfinite(loss) || !grad.allFinite()) {
    throw NumericalError("optimizer diverged: non-finite loss at iteration " + std::to_string(iteration));
  }
  return loss;
}

} // namespace

AdamResult minimize_adam(const Objective& objective, Eigen::VectorXd x0, const AdamOptions& options) {
  options.validate();
  AdamResult result;
  result.trace.reserve(options.iterations + 1);

  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd grad;
  double loss = checked(objective(x, grad), grad, 0);
  result.initial_loss = loss;
  result.trace.push_back(loss);
  result.x = x;
  result.final_loss = loss;

  AdamOptimizer adam(x.size(), options);
  Eigen::VectorXd trial_grad;
  for (int it = 1; it <= options.iterations; ++it) {
    Eigen::VectorXd delta = adam.step(grad);
    if (!options.monotone) {
      x += delta;
      loss = checked(objective(x, grad), grad, it);
    } else {
      for (int h = 0; h <= options.max_halvings; ++h) {
        const Eigen::VectorXd trial = x + delta;
        const double trial_loss = checked(objective(trial, trial_grad), trial_grad, it);
        if (trial_loss <= loss) {
          x = trial;
          loss = trial_loss;
          grad.swap(trial_grad);
          break;
        }
        delta *= 0.5;
      }
    }
    result.trace.push_back(loss);
    if (loss < result.final_loss) {
      result.final_loss = loss;
      result.x = x;
      result.best_iteration = it;
    }
  }
  return result;
}

} // namespace rtk
