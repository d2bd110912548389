#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "nvgd/types.hpp"

namespace nvgd {

struct Capabilities {
  bool has_log_density = false;
  bool has_exact_sampler = false;
  bool is_stochastic = false;
};

/// A target density known through its score (gradient of the log-density).
///
/// Implementations are immutable after construction and safe to evaluate concurrently.
/// Stochastic targets also provide a minibatch score; the caller owns the minibatch RNG.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual Capabilities capabilities() const = 0;

  /// Exact (full-data) score.
  virtual Vector score(const Vector& x) const = 0;

  /// Minibatch score estimate; deterministic targets ignore the batch.
  virtual Vector score(const Vector& x, std::span<const std::size_t> batch) const {
    (void)batch;
    return score(x);
  }

  /// Number of data points minibatches are drawn from (0 for deterministic targets).
  virtual std::size_t data_size() const { return 0; }
  virtual std::size_t batch_size() const { return 0; }

  /// Unnormalized log-density. Throws std::logic_error unless has_log_density.
  virtual double log_density(const Vector& x) const;

  /// Exact samples. Throws std::logic_error unless has_exact_sampler.
  virtual ParticleEnsemble sample(std::size_t count, std::uint64_t seed) const;

  virtual bool reports_guards() const { return false; }

  /// Number of numerical guards (clamps) the score hit at x.
  virtual std::size_t guard_hits(const Vector& x) const {
    (void)x;
    return 0;
  }
};

struct DiagonalGaussian {
  Vector mean;
  Vector variances;

  DiagonalGaussian() = default;
  DiagonalGaussian(Vector mean, Vector variances);

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  static DiagonalGaussian standard(std::size_t d);
  /// Zero mean, variances log-spaced between lo and hi (inclusive).
  static DiagonalGaussian logspaced(std::size_t d, double lo, double hi);
};

/// -(x - mu) / sigma^2 elementwise.
Vector gaussian_score(const DiagonalGaussian& g, const Vector& x);
double gaussian_log_density(const DiagonalGaussian& g, const Vector& x);
Matrix gaussian_sample(const DiagonalGaussian& g, std::size_t count, std::uint64_t seed);

class GaussianTarget final : public ScoreModel {
 public:
  explicit GaussianTarget(DiagonalGaussian g) : g_(std::move(g)) {}

  std::string name() const override { return "gaussian"; }
  std::size_t dim() const override { return g_.dim(); }
  Capabilities capabilities() const override { return {true, true, false}; }
  Vector score(const Vector& x) const override { return gaussian_score(g_, x); }
  double log_density(const Vector& x) const override { return gaussian_log_density(g_, x); }
  ParticleEnsemble sample(std::size_t count, std::uint64_t seed) const override {
    return ParticleEnsemble(gaussian_sample(g_, count, seed));
  }
  const DiagonalGaussian& distribution() const { return g_; }

 private:
  DiagonalGaussian g_;
};

/// Neal's funnel: x_1 ~ N(0, scale_var), x_i | x_1 ~ N(0, exp(x_1)) for i >= 2.
/// Both second arguments are variances.
struct Funnel {
  std::size_t dim = 2;
  double scale_var = 3.0;
};

/// exp(-x_1) is clamped at this value inside the score.
inline constexpr double kFunnelPrecisionClamp = 1e12;

Vector funnel_score(const Funnel& f, const Vector& x);
double funnel_log_density(const Funnel& f, const Vector& x);
ParticleEnsemble funnel_exact_sample(const Funnel& f, std::size_t count, std::uint64_t seed);
bool funnel_clamped(const Funnel& f, const Vector& x);

class FunnelTarget final : public ScoreModel {
 public:
  explicit FunnelTarget(Funnel f);

  std::string name() const override { return "funnel"; }
  std::size_t dim() const override { return f_.dim; }
  Capabilities capabilities() const override { return {true, true, false}; }
  Vector score(const Vector& x) const override { return funnel_score(f_, x); }
  double log_density(const Vector& x) const override { return funnel_log_density(f_, x); }
  ParticleEnsemble sample(std::size_t count, std::uint64_t seed) const override {
    return funnel_exact_sample(f_, count, seed);
  }
  bool reports_guards() const override { return true; }
  std::size_t guard_hits(const Vector& x) const override { return funnel_clamped(f_, x) ? 1 : 0; }
  const Funnel& funnel() const { return f_; }

 private:
  Funnel f_;
};

}  // namespace nvgd
