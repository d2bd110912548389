#pragma once

#include <cstdint>
#include <functional>

#include "nvgd/targets.hpp"
#include "nvgd/types.hpp"
#include "nvgd/witness.hpp"

namespace nvgd {

/// Squared-exponential kernel exp(-|x - y|^2 / (2 h^2)).
struct KernelSpec {
  double bandwidth = 1.0;

  explicit KernelSpec(double h = 1.0);
  double operator()(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) const;
  double of_squared_distance(double sq) const { return std::exp(-sq / (2.0 * bandwidth * bandwidth)); }
};

/// h = sqrt(med^2 / (2 log n)), med^2 the median of the n(n-1)/2 pairwise squared distances
/// (mean of the two central values for an even count).
double median_heuristic(const Matrix& particles);

/// Biased (V-statistic) squared MMD; always >= 0 up to rounding.
double mmd_squared(const Matrix& X, const Matrix& Y, const KernelSpec& kernel);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

MonteCarloEstimate monte_carlo(const Vector& samples);

/// Value and divergence of a vector field at one point.
struct FieldPoint {
  Vector value;
  double divergence = 0.0;
};
using VectorField = std::function<FieldPoint(const Vector&)>;

/// Mean over the ensemble of f(x)^T score(x) + div f(x).
MonteCarloEstimate stein_discrepancy_of_field(const VectorField& field, const Matrix& particles,
                                              const Matrix& scores);

/// Witness network as a field with exact divergence.
VectorField witness_field(const WitnessParams& params);

/// Monte Carlo estimate of 0.5 E_q |grad log p - grad log q|^2, the maximum of the
/// regularized Stein discrepancy over all fields.
MonteCarloEstimate optimal_rsd_oracle(const DiagonalGaussian& q, const DiagonalGaussian& p,
                                      std::size_t n_mc, std::uint64_t seed);

/// 0.5 sum_i E_q (x_i (1/s_q - 1/s_p) + mu_p/s_p - mu_q/s_q)^2 in closed form.
double optimal_rsd_closed_form(const DiagonalGaussian& q, const DiagonalGaussian& p);

/// Integration-by-parts identity E_q[div f] = -E_q[f^T grad log q] on shared samples.
struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double std_error = 0.0;  // of the paired difference
  bool pass = false;
};

inline constexpr double kIdentityCheckSigmas = 4.0;

IdentityCheck ibp_identity_check(const WitnessParams& params, const DiagonalGaussian& q,
                                 std::size_t n_mc, std::uint64_t seed);

}  // namespace nvgd
