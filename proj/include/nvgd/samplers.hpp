#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "nvgd/diagnostics.hpp"
#include "nvgd/optimizer.hpp"
#include "nvgd/random.hpp"
#include "nvgd/types.hpp"
#include "nvgd/witness.hpp"

namespace nvgd {

struct NvgdConfig {
  double particle_step = 0.1;    // epsilon
  double learning_rate = 1e-3;   // eta
  std::size_t inner_steps = 100; // P
  double validation_fraction = 0.2;
  std::size_t patience = 20;
  std::vector<std::size_t> hidden = {32, 32};
  Activation activation = Activation::tanh;
  OptimizerKind optimizer = OptimizerKind::sgd;
  /// Unset: exact divergence for d <= kExactDivergenceMaxDim, Hutchinson above.
  std::optional<DivergenceMode> divergence;
  std::size_t hutchinson_draws = 1;

  std::vector<std::size_t> layer_dims(std::size_t d) const;
  DivergenceMode divergence_mode(std::size_t d) const {
    return divergence.value_or(default_divergence_mode(d));
  }
  /// Throws std::invalid_argument naming the offending field.
  void validate(std::size_t particles) const;
};

/// Validation particles for a split of n: round(fraction * n), at least 2 on each side.
std::size_t validation_count(std::size_t n, double fraction);

/// Random streams consumed by witness training.
struct NvgdStreams {
  Rng split;
  Rng hutchinson;

  static NvgdStreams from_seed(std::uint64_t seed) {
    return {make_rng(seed, Stream::split), make_rng(seed, Stream::hutchinson)};
  }
};

struct InnerTrainResult {
  WitnessParams params;           // parameters at the best validation evaluation
  std::size_t steps = 0;          // ascent steps taken
  double best_validation_rsd = 0; // validation R-hat-SD of `params`
  double last_train_rsd = 0;      // training objective before the last step
};

/// Random train/validation split, then up to P ascent steps on the training R-hat-SD with
/// early stopping once the validation value has not improved for `patience` evaluations.
/// `opt` carries across calls (warm start).
InnerTrainResult nvgd_inner_train(const WitnessParams& params, OptState& opt,
                                  const ParticleEnsemble& ensemble, const Matrix& scores,
                                  const NvgdConfig& cfg, NvgdStreams& streams);

/// x_i <- x_i + eps f(x_i).
ParticleEnsemble nvgd_particle_update(const ParticleEnsemble& ensemble,
                                      const WitnessParams& params, double eps);

/// Fixed-length witness training on one particle set with no validation split or early
/// stopping; returns the training R-hat-SD before every step.
std::vector<double> witness_training_curve(WitnessParams& params, OptState& opt,
                                           const Matrix& particles, const Matrix& scores,
                                           std::size_t steps, DivergenceMode mode,
                                           std::size_t hutchinson_draws, Rng& rng);

enum class BandwidthRule { median_heuristic, fixed };

struct SvgdConfig {
  double step_size = 0.1;
  BandwidthRule bandwidth = BandwidthRule::median_heuristic;
  double fixed_bandwidth = 1.0;
  OptimizerKind optimizer = OptimizerKind::sgd;

  void validate() const;
};

/// Median heuristic, or 1 when n = 1 (no pairwise distances), or the fixed value.
double svgd_bandwidth(const Matrix& particles, const SvgdConfig& cfg);

/// phi(x_i) = (1/n) sum_j k(x_j, x_i) s_j + grad_{x_j} k(x_j, x_i) for the RBF kernel.
Matrix svgd_direction(const Matrix& particles, const Matrix& scores, double bandwidth);

/// Same with an arbitrary kernel given as (x_j, x_i) -> (k, grad_{x_j} k).
using KernelWithGradient =
    std::function<std::pair<double, Vector>(const Vector& xj, const Vector& xi)>;
Matrix svgd_direction(const Matrix& particles, const Matrix& scores,
                      const KernelWithGradient& kernel);

/// The SVGD update direction as a field of x with its exact divergence (RBF kernel).
VectorField svgd_field(const Matrix& particles, const Matrix& scores, double bandwidth);

/// Plain step: x <- x + step_size * phi.
ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble, const Matrix& scores,
                           const SvgdConfig& cfg);
/// Step through an optimizer over the flattened positions (sgd or adam ascent on phi).
ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble, const Matrix& scores,
                           const SvgdConfig& cfg, OptState& state);

struct UlaConfig {
  double step_size = 0.01;
  std::size_t thinning = 100;  // sequential mode only

  void validate() const;
};

/// x <- x + eps s + sqrt(2 eps) xi with the supplied standard-normal xi.
ParticleEnsemble ula_step_with_noise(const ParticleEnsemble& ensemble, const Matrix& scores,
                                     double eps, const Matrix& noise);
ParticleEnsemble ula_step(const ParticleEnsemble& ensemble, const Matrix& scores, double eps,
                          Rng& rng);

using ScoreFn = std::function<Vector(const Vector&)>;

/// One chain of chain_length steps from init, keeping every thinning-th state.
ParticleEnsemble ula_sequential(const ScoreFn& score, const Vector& init, double eps,
                                std::size_t chain_length, std::size_t thinning, Rng& rng);

/// Advances x in place by `steps` ULA steps, appending every state whose 1-based global
/// step index (counted from *step_counter) is a multiple of thinning.
void ula_advance_chain(const ScoreFn& score, Vector& x, double eps, std::size_t steps,
                       std::size_t thinning, std::uint64_t& step_counter, Rng& rng,
                       std::vector<Vector>& retained);

}  // namespace nvgd
