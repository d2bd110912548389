#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

#include "nvgd/types.hpp"
#include "nvgd/witness.hpp"

namespace nvgd {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

/// Gradient-ascent optimizer state over a flat parameter vector.
struct OptState {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  Vector first_moment;
  Vector second_moment;

  static OptState make(OptimizerKind kind, double learning_rate, std::size_t size);
};

/// In-place ascent update theta += step(g). Increments opt.step by one.
void ascent_step(Vector& theta, const Vector& gradient, OptState& opt);

/// Ascent update of witness parameters. sgd: theta + eta g; adam: bias-corrected moments.
std::pair<WitnessParams, OptState> opt_step(const WitnessParams& params,
                                            const WitnessParams& gradient, OptState opt);

}  // namespace nvgd
