#include "nvgd/optimizer.hpp"

#include <cmath>
#include <string>

namespace nvgd {

std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                              "' (expected sgd or adam)");
}

OptState OptState::make(OptimizerKind kind, double learning_rate, std::size_t size) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning rate must be a finite non-negative number");
  OptState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  s.first_moment = Vector::Zero(static_cast<Eigen::Index>(size));
  s.second_moment = Vector::Zero(static_cast<Eigen::Index>(size));
  return s;
}

void ascent_step(Vector& theta, const Vector& gradient, OptState& opt) {
  if (theta.size() != gradient.size())
    throw std::invalid_argument("parameter and gradient sizes differ");
  ++opt.step;
  if (opt.kind == OptimizerKind::sgd) {
    theta += opt.learning_rate * gradient;
    return;
  }
  if (opt.first_moment.size() != theta.size() || opt.second_moment.size() != theta.size())
    throw std::invalid_argument("Adam moment shapes do not match parameters");
  opt.first_moment = opt.beta1 * opt.first_moment + (1.0 - opt.beta1) * gradient;
  opt.second_moment =
      opt.beta2 * opt.second_moment + (1.0 - opt.beta2) * gradient.cwiseAbs2();
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  theta.array() += opt.learning_rate * (opt.first_moment.array() / c1) /
                   ((opt.second_moment.array() / c2).sqrt() + opt.epsilon);
}

std::pair<WitnessParams, OptState> opt_step(const WitnessParams& params,
                                            const WitnessParams& gradient, OptState opt) {
  Vector theta = params.flatten();
  ascent_step(theta, gradient.flatten(), opt);
  WitnessParams next = params;
  next.assign(theta);
  return {std::move(next), std::move(opt)};
}

}  // namespace nvgd
