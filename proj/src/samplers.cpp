#include "nvgd/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "nvgd/parallel.hpp"

namespace nvgd {

std::vector<std::size_t> NvgdConfig::layer_dims(std::size_t d) const {
  std::vector<std::size_t> dims{d};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(d);
  return dims;
}

std::size_t validation_count(std::size_t n, double fraction) {
  const auto v = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(v, 2, n >= 2 ? n - 2 : 0);
}

void NvgdConfig::validate(std::size_t particles) const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(particle_step)) throw std::invalid_argument("nvgd.step_size must be positive");
  if (!positive(learning_rate)) throw std::invalid_argument("nvgd.learning_rate must be positive");
  if (inner_steps == 0) throw std::invalid_argument("nvgd.inner_steps must be at least 1");
  if (patience == 0) throw std::invalid_argument("nvgd.patience must be at least 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("nvgd.validation_fraction must lie in (0, 1)");
  if (particles < 4)
    throw std::invalid_argument("nvgd needs at least 4 particles for a train/validation split");
  for (std::size_t h : hidden)
    if (h == 0) throw std::invalid_argument("nvgd.hidden sizes must be positive");
  if (hutchinson_draws == 0) throw std::invalid_argument("nvgd.hutchinson_draws must be at least 1");
}

namespace {

Matrix gather(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<HutchinsonNoise> draw_noise(Rng& rng, std::size_t count, std::size_t m,
                                        std::size_t d) {
  std::vector<HutchinsonNoise> noise;
  noise.reserve(count);
  for (std::size_t i = 0; i < count; ++i) noise.push_back(HutchinsonNoise::sample(rng, m, d));
  return noise;
}

void ascend(WitnessParams& params, const WitnessParams& gradient, OptState& opt) {
  Vector theta = params.flatten();
  ascent_step(theta, gradient.flatten(), opt);
  params.assign(theta);
}

}  // namespace

InnerTrainResult nvgd_inner_train(const WitnessParams& params, OptState& opt,
                                  const ParticleEnsemble& ensemble, const Matrix& scores,
                                  const NvgdConfig& cfg, NvgdStreams& streams) {
  const std::size_t n = ensemble.size();
  const std::size_t d = ensemble.dim();
  cfg.validate(n);
  if (params.dim() != d) throw std::invalid_argument("witness dimension does not match particles");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), streams.split);
  const std::size_t n_val = validation_count(n, cfg.validation_fraction);
  const std::span<const std::size_t> val_idx(order.data(), n_val);
  const std::span<const std::size_t> train_idx(order.data() + n_val, n - n_val);
  const Matrix x_train = gather(ensemble.positions, train_idx);
  const Matrix s_train = gather(scores, train_idx);
  const Matrix x_val = gather(ensemble.positions, val_idx);
  const Matrix s_val = gather(scores, val_idx);

  const DivergenceMode mode = cfg.divergence_mode(d);
  const bool hutch = mode == DivergenceMode::hutchinson;
  const auto val_noise = hutch ? draw_noise(streams.hutchinson, n_val, cfg.hutchinson_draws, d)
                               : std::vector<HutchinsonNoise>{};

  InnerTrainResult result;
  result.params = params;
  result.best_validation_rsd = -std::numeric_limits<double>::infinity();
  WitnessParams current = params;
  std::size_t since_best = 0;
  for (std::size_t k = 1; k <= cfg.inner_steps; ++k) {
    const auto train_noise =
        hutch ? draw_noise(streams.hutchinson, train_idx.size(), cfg.hutchinson_draws, d)
              : std::vector<HutchinsonNoise>{};
    RsdValueAndGradient vg = rsd_value_and_gradient(current, x_train, s_train, train_noise, mode);
    if (!std::isfinite(vg.value))
      throw NumericalError("non-finite training objective at inner step " + std::to_string(k));
    result.last_train_rsd = vg.value;
    ascend(current, vg.gradient, opt);
    result.steps = k;

    const double val = rsd_estimate(current, x_val, s_val, val_noise, mode);
    if (val > result.best_validation_rsd) {
      result.best_validation_rsd = val;
      result.params = current;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

ParticleEnsemble nvgd_particle_update(const ParticleEnsemble& ensemble,
                                      const WitnessParams& params, double eps) {
  if (params.dim() != ensemble.dim())
    throw std::invalid_argument("witness dimension does not match particles");
  ParticleEnsemble next = ensemble;
  for_each_block(ensemble.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      next.positions.row(r) += eps * forward(params, ensemble.positions.row(r).transpose()).transpose();
    }
  });
  if (!next.all_finite()) throw NumericalError("NVGD particle update produced non-finite positions");
  ++next.step;
  return next;
}

std::vector<double> witness_training_curve(WitnessParams& params, OptState& opt,
                                           const Matrix& particles, const Matrix& scores,
                                           std::size_t steps, DivergenceMode mode,
                                           std::size_t hutchinson_draws, Rng& rng) {
  std::vector<double> curve;
  curve.reserve(steps);
  const auto n = static_cast<std::size_t>(particles.rows());
  const auto d = static_cast<std::size_t>(particles.cols());
  for (std::size_t k = 1; k <= steps; ++k) {
    const auto noise = mode == DivergenceMode::hutchinson ? draw_noise(rng, n, hutchinson_draws, d)
                                                          : std::vector<HutchinsonNoise>{};
    RsdValueAndGradient vg = rsd_value_and_gradient(params, particles, scores, noise, mode);
    if (!std::isfinite(vg.value))
      throw NumericalError("non-finite training objective at step " + std::to_string(k));
    curve.push_back(vg.value);
    ascend(params, vg.gradient, opt);
  }
  return curve;
}

void SvgdConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw std::invalid_argument("svgd.step_size must be positive");
  if (bandwidth == BandwidthRule::fixed && !(fixed_bandwidth > 0.0))
    throw std::invalid_argument("svgd.bandwidth must be positive");
}

double svgd_bandwidth(const Matrix& particles, const SvgdConfig& cfg) {
  if (cfg.bandwidth == BandwidthRule::fixed) return cfg.fixed_bandwidth;
  if (particles.rows() < 2) return 1.0;
  return median_heuristic(particles);
}

Matrix svgd_direction(const Matrix& particles, const Matrix& scores, double h) {
  if (particles.rows() != scores.rows() || particles.cols() != scores.cols())
    throw std::invalid_argument("particles and scores shapes differ");
  if (!(h > 0.0)) throw std::invalid_argument("SVGD bandwidth must be positive");
  const auto n = static_cast<std::size_t>(particles.rows());
  const double inv_h2 = 1.0 / (h * h);
  Matrix phi = Matrix::Zero(particles.rows(), particles.cols());
  for_each_block(n, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a) {
      const auto i = static_cast<Eigen::Index>(a);
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(particles.cols());
      for (Eigen::Index j = 0; j < particles.rows(); ++j) {
        const Eigen::RowVectorXd diff = particles.row(i) - particles.row(j);
        const double k = std::exp(-0.5 * diff.squaredNorm() * inv_h2);
        acc += k * scores.row(j) + (k * inv_h2) * diff;
      }
      phi.row(i) = acc / static_cast<double>(n);
    }
  });
  return phi;
}

Matrix svgd_direction(const Matrix& particles, const Matrix& scores,
                      const KernelWithGradient& kernel) {
  if (particles.rows() != scores.rows() || particles.cols() != scores.cols())
    throw std::invalid_argument("particles and scores shapes differ");
  const Eigen::Index n = particles.rows();
  Matrix phi = Matrix::Zero(n, particles.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector acc = Vector::Zero(particles.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto [k, grad] = kernel(particles.row(j).transpose(), particles.row(i).transpose());
      acc += k * scores.row(j).transpose() + grad;
    }
    phi.row(i) = acc.transpose() / static_cast<double>(n);
  }
  return phi;
}

VectorField svgd_field(const Matrix& particles, const Matrix& scores, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("SVGD bandwidth must be positive");
  return [particles, scores, h](const Vector& x) {
    const double inv_h2 = 1.0 / (h * h);
    const auto d = static_cast<double>(x.size());
    FieldPoint fp{Vector::Zero(x.size()), 0.0};
    for (Eigen::Index j = 0; j < particles.rows(); ++j) {
      const Vector diff = x - particles.row(j).transpose();
      const double sq = diff.squaredNorm();
      const double k = std::exp(-0.5 * sq * inv_h2);
      const Vector s = scores.row(j).transpose();
      fp.value += k * s + (k * inv_h2) * diff;
      fp.divergence += k * inv_h2 * (-s.dot(diff) + d - sq * inv_h2);
    }
    const auto n = static_cast<double>(particles.rows());
    fp.value /= n;
    fp.divergence /= n;
    return fp;
  };
}

ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble, const Matrix& scores,
                           const SvgdConfig& cfg) {
  cfg.validate();
  if (ensemble.size() == 0) throw std::invalid_argument("SVGD needs at least one particle");
  const double h = svgd_bandwidth(ensemble.positions, cfg);
  ParticleEnsemble next = ensemble;
  next.positions += cfg.step_size * svgd_direction(ensemble.positions, scores, h);
  if (!next.all_finite()) throw NumericalError("SVGD update produced non-finite positions");
  ++next.step;
  return next;
}

ParticleEnsemble svgd_step(const ParticleEnsemble& ensemble, const Matrix& scores,
                           const SvgdConfig& cfg, OptState& state) {
  cfg.validate();
  if (ensemble.size() == 0) throw std::invalid_argument("SVGD needs at least one particle");
  const double h = svgd_bandwidth(ensemble.positions, cfg);
  const Matrix phi = svgd_direction(ensemble.positions, scores, h);
  Vector theta = ensemble.positions.reshaped<Eigen::RowMajor>();
  ascent_step(theta, phi.reshaped<Eigen::RowMajor>(), state);
  ParticleEnsemble next = ensemble;
  next.positions = theta.reshaped<Eigen::RowMajor>(ensemble.positions.rows(), ensemble.positions.cols());
  if (!next.all_finite()) throw NumericalError("SVGD update produced non-finite positions");
  ++next.step;
  return next;
}

void UlaConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw std::invalid_argument("ula.step_size must be positive");
  if (thinning == 0) throw std::invalid_argument("ula.thinning must be at least 1");
}

ParticleEnsemble ula_step_with_noise(const ParticleEnsemble& ensemble, const Matrix& scores,
                                     double eps, const Matrix& noise) {
  if (!(eps > 0.0)) throw std::invalid_argument("ULA step size must be positive");
  if (scores.rows() != ensemble.positions.rows() || scores.cols() != ensemble.positions.cols() ||
      noise.rows() != scores.rows() || noise.cols() != scores.cols())
    throw std::invalid_argument("ULA: shape mismatch");
  ParticleEnsemble next = ensemble;
  next.positions += eps * scores + std::sqrt(2.0 * eps) * noise;
  if (!next.all_finite()) throw NumericalError("ULA update produced non-finite positions");
  ++next.step;
  return next;
}

ParticleEnsemble ula_step(const ParticleEnsemble& ensemble, const Matrix& scores, double eps,
                          Rng& rng) {
  const Matrix noise = standard_normal(rng, ensemble.positions.rows(), ensemble.positions.cols());
  return ula_step_with_noise(ensemble, scores, eps, noise);
}

void ula_advance_chain(const ScoreFn& score, Vector& x, double eps, std::size_t steps,
                       std::size_t thinning, std::uint64_t& step_counter, Rng& rng,
                       std::vector<Vector>& retained) {
  if (thinning == 0) throw std::invalid_argument("thinning must be at least 1");
  const double noise_scale = std::sqrt(2.0 * eps);
  for (std::size_t s = 0; s < steps; ++s) {
    const Vector g = score(x);
    // Fresh draws per step so the trajectory does not depend on how steps are chunked.
    const Matrix xi = standard_normal(rng, 1, x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += eps * g[j] + noise_scale * xi(0, j);
    if (!x.allFinite())
      throw NumericalError("sequential ULA chain became non-finite at step " +
                           std::to_string(step_counter + 1));
    if (++step_counter % thinning == 0) retained.push_back(x);
  }
}

ParticleEnsemble ula_sequential(const ScoreFn& score, const Vector& init, double eps,
                                std::size_t chain_length, std::size_t thinning, Rng& rng) {
  if (!(eps > 0.0)) throw std::invalid_argument("ULA step size must be positive");
  if (thinning == 0 || chain_length % thinning != 0)
    throw std::invalid_argument("chain length must be a multiple of the thinning interval");
  Vector x = init;
  std::uint64_t counter = 0;
  std::vector<Vector> kept;
  kept.reserve(chain_length / thinning);
  ula_advance_chain(score, x, eps, chain_length, thinning, counter, rng, kept);
  Matrix out(static_cast<Eigen::Index>(kept.size()), init.size());
  for (std::size_t i = 0; i < kept.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = kept[i].transpose();
  return ParticleEnsemble(std::move(out), chain_length);
}

}  // namespace nvgd
