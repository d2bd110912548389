#include "nvgd/targets.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "nvgd/random.hpp"

namespace nvgd {

double ScoreModel::log_density(const Vector&) const {
  throw std::logic_error("target '" + name() + "' has no log-density");
}

ParticleEnsemble ScoreModel::sample(std::size_t, std::uint64_t) const {
  throw std::logic_error("target '" + name() + "' has no exact sampler");
}

DiagonalGaussian::DiagonalGaussian(Vector m, Vector v) : mean(std::move(m)), variances(std::move(v)) {
  if (mean.size() != variances.size())
    throw std::invalid_argument("Gaussian mean and variance lengths differ");
  if (mean.size() == 0) throw std::invalid_argument("Gaussian needs dimension >= 1");
  if (!(variances.array() > 0.0).all() || !variances.allFinite())
    throw std::invalid_argument("Gaussian variances must be positive and finite");
}

DiagonalGaussian DiagonalGaussian::standard(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return {Vector::Zero(n), Vector::Ones(n)};
}

DiagonalGaussian DiagonalGaussian::logspaced(std::size_t d, double lo, double hi) {
  if (!(lo > 0.0) || !(hi > 0.0)) throw std::invalid_argument("log-spaced variances need lo, hi > 0");
  const auto n = static_cast<Eigen::Index>(d);
  Vector v(n);
  const double a = std::log10(lo), b = std::log10(hi);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    v[i] = std::pow(10.0, a + t * (b - a));
  }
  return {Vector::Zero(n), v};
}

Vector gaussian_score(const DiagonalGaussian& g, const Vector& x) {
  if (x.size() != g.mean.size()) throw std::invalid_argument("Gaussian score: dimension mismatch");
  return -((x - g.mean).array() / g.variances.array()).matrix();
}

double gaussian_log_density(const DiagonalGaussian& g, const Vector& x) {
  if (x.size() != g.mean.size()) throw std::invalid_argument("Gaussian density: dimension mismatch");
  const double quad = ((x - g.mean).array().square() / g.variances.array()).sum();
  const double logdet = g.variances.array().log().sum();
  return -0.5 * (quad + logdet + static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi));
}

Matrix gaussian_sample(const DiagonalGaussian& g, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  Matrix z = standard_normal(rng, static_cast<Eigen::Index>(count), g.mean.size());
  const Vector sd = g.variances.cwiseSqrt();
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    z.row(i) = (z.row(i).transpose().cwiseProduct(sd) + g.mean).transpose();
  return z;
}

FunnelTarget::FunnelTarget(Funnel f) : f_(f) {
  if (f_.dim < 2) throw std::invalid_argument("funnel dimension must be >= 2");
  if (!(f_.scale_var > 0.0)) throw std::invalid_argument("funnel scale_var must be positive");
}

namespace {

double funnel_precision(double x1) {
  // exp(-x1) overflows to inf for x1 < -709; clamp well before that.
  const double e = std::exp(-x1);
  return std::min(e, kFunnelPrecisionClamp);
}

void check_funnel(const Funnel& f, const Vector& x) {
  if (f.dim < 2) throw std::invalid_argument("funnel dimension must be >= 2");
  if (static_cast<std::size_t>(x.size()) != f.dim)
    throw std::invalid_argument("funnel: dimension mismatch");
}

}  // namespace

Vector funnel_score(const Funnel& f, const Vector& x) {
  check_funnel(f, x);
  const double prec = funnel_precision(x[0]);
  Vector g(x.size());
  double g0 = -x[0] / f.scale_var;
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    g0 += -0.5 + 0.5 * x[i] * x[i] * prec;
    g[i] = -x[i] * prec;
  }
  g[0] = g0;
  return g;
}

double funnel_log_density(const Funnel& f, const Vector& x) {
  check_funnel(f, x);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double lp = -0.5 * (x[0] * x[0] / f.scale_var + std::log(f.scale_var) + log2pi);
  const double prec = std::exp(-x[0]);
  for (Eigen::Index i = 1; i < x.size(); ++i)
    lp += -0.5 * (x[i] * x[i] * prec + x[0] + log2pi);
  return lp;
}

bool funnel_clamped(const Funnel& f, const Vector& x) {
  check_funnel(f, x);
  return std::exp(-x[0]) > kFunnelPrecisionClamp;
}

ParticleEnsemble funnel_exact_sample(const Funnel& f, std::size_t count, std::uint64_t seed) {
  if (f.dim < 2) throw std::invalid_argument("funnel dimension must be >= 2");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(f.dim));
  const double sd1 = std::sqrt(f.scale_var);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out(r, 0) = sd1 * normal(rng);
    const double sd = std::exp(0.5 * out(r, 0));
    for (Eigen::Index c = 1; c < out.cols(); ++c) out(r, c) = sd * normal(rng);
  }
  return ParticleEnsemble(std::move(out));
}

}  // namespace nvgd
