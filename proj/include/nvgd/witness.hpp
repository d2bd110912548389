#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nvgd/random.hpp"
#include "nvgd/types.hpp"

namespace nvgd {

enum class Activation { tanh, softplus };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Parameters of the witness MLP f: R^d -> R^d.
///
/// Layer l maps a_{l-1} to W_l a_{l-1} + b_l; every layer except the last is followed by the
/// activation. Weights are stored out x in. The same type doubles as the container for
/// parameter gradients and optimizer moments.
struct WitnessParams {
  std::vector<std::size_t> layer_dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::tanh;

  std::size_t dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  /// Concatenates (W_1, b_1, W_2, b_2, ...) with weights in column-major order.
  Vector flatten() const;
  void assign(const Vector& flat);

  /// Throws std::invalid_argument on inconsistent shapes, NumericalError on non-finite entries.
  void validate() const;

  static WitnessParams zeros(std::span<const std::size_t> layer_dims, Activation activation);
  WitnessParams zeros_like() const { return zeros(layer_dims, activation); }
};

void check_layer_dims(std::span<const std::size_t> layer_dims);

/// Weights ~ N(0, 1/fan_in), zero biases.
WitnessParams init_params(std::span<const std::size_t> layer_dims, Activation activation,
                          std::uint64_t seed);

/// m x d standard-normal probe vectors for the Hutchinson trace estimator.
struct HutchinsonNoise {
  Eigen::MatrixXd draws;

  std::size_t count() const { return static_cast<std::size_t>(draws.rows()); }
  static HutchinsonNoise sample(Rng& rng, std::size_t m, std::size_t d);
};

enum class DivergenceMode { exact, hutchinson };

/// Dimensions up to this use the exact O(d) Jacobian trace by default.
inline constexpr std::size_t kExactDivergenceMaxDim = 8;

inline DivergenceMode default_divergence_mode(std::size_t d) {
  return d <= kExactDivergenceMaxDim ? DivergenceMode::exact : DivergenceMode::hutchinson;
}

Vector forward(const WitnessParams& params, const Vector& x);

/// Jacobian-vector product (df/dx)(x) v by forward tangent propagation.
Vector jvp(const WitnessParams& params, const Vector& x, const Vector& v);

/// (1/m) sum_k z_k^T J(x) z_k.
double hutchinson_divergence(const WitnessParams& params, const Vector& x,
                             const HutchinsonNoise& noise);

/// Trace of the Jacobian via d basis-vector tangents.
double exact_divergence(const WitnessParams& params, const Vector& x);

/// Monte Carlo regularized Stein discrepancy
///   (1/n) sum_i f(x_i)^T s_i + div f(x_i) - 0.5 |f(x_i)|^2
/// with s_i = scores.row(i). `noise` holds one entry per particle and is ignored in exact mode.
double rsd_estimate(const WitnessParams& params, const Matrix& particles, const Matrix& scores,
                    std::span<const HutchinsonNoise> noise, DivergenceMode mode);

/// Exact gradient of rsd_estimate with respect to every weight and bias, for the same noise.
WitnessParams rsd_gradient(const WitnessParams& params, const Matrix& particles,
                           const Matrix& scores, std::span<const HutchinsonNoise> noise,
                           DivergenceMode mode);

struct RsdValueAndGradient {
  double value = 0.0;
  WitnessParams gradient;
};

RsdValueAndGradient rsd_value_and_gradient(const WitnessParams& params, const Matrix& particles,
                                           const Matrix& scores,
                                           std::span<const HutchinsonNoise> noise,
                                           DivergenceMode mode);

}  // namespace nvgd
