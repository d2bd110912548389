#include "nvgd/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace nvgd {

namespace {

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

void check_particle(const LogisticRegressionPosterior& m, const Vector& particle) {
  if (static_cast<std::size_t>(particle.size()) != m.dim())
    throw std::invalid_argument("logistic particle has dimension " +
                                std::to_string(particle.size()) + ", expected " +
                                std::to_string(m.dim()));
}

void check_batch(const LogisticRegressionPosterior& m, std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("logistic score needs a non-empty batch");
  for (std::size_t i : batch)
    if (i >= m.num_data()) throw std::out_of_range("batch index out of range");
}

}  // namespace

LogisticRegressionPosterior::LogisticRegressionPosterior(Eigen::MatrixXd X, Eigen::VectorXd y,
                                                         double a0_, double b0_,
                                                         std::size_t batch_)
    : design(std::move(X)), labels(std::move(y)), a0(a0_), b0(b0_), batch(batch_) {
  if (design.rows() != labels.size())
    throw std::invalid_argument("design rows and label count differ");
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw std::invalid_argument("logistic labels must be 0 or 1");
  if (batch == 0 || batch > num_data())
    throw std::invalid_argument("minibatch size must lie in [1, N]");
  if (!(a0 > 0.0) || !(b0 > 0.0)) throw std::invalid_argument("Gamma prior needs a0, b0 > 0");
}

Vector logreg_prior_score(const LogisticRegressionPosterior& m, const Vector& particle) {
  check_particle(m, particle);
  const auto D = particle.size() - 1;
  const auto beta = particle.head(D);
  const double alpha = std::exp(particle[D]);
  Vector g(particle.size());
  g.head(D) = -alpha * beta;
  g[D] = m.a0 - m.b0 * alpha + 0.5 * static_cast<double>(D) - 0.5 * alpha * beta.squaredNorm();
  return g;
}

Vector logreg_score(const LogisticRegressionPosterior& m, const Vector& particle,
                    std::span<const std::size_t> batch) {
  check_batch(m, batch);
  Vector g = logreg_prior_score(m, particle);
  const auto D = particle.size() - 1;
  const auto beta = particle.head(D);
  Vector lik = Vector::Zero(D);
  for (std::size_t i : batch) {
    const auto r = static_cast<Eigen::Index>(i);
    const double t = m.design.row(r).dot(beta);
    lik += (m.labels[r] - sigmoid(t)) * m.design.row(r).transpose();
  }
  g.head(D) += (static_cast<double>(m.num_data()) / static_cast<double>(batch.size())) * lik;
  return g;
}

Vector logreg_full_score(const LogisticRegressionPosterior& m, const Vector& particle) {
  std::vector<std::size_t> all(m.num_data());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return logreg_score(m, particle, all);
}

double logreg_log_density(const LogisticRegressionPosterior& m, const Vector& particle,
                          std::span<const std::size_t> batch) {
  check_particle(m, particle);
  check_batch(m, batch);
  const auto D = particle.size() - 1;
  const auto beta = particle.head(D);
  const double u = particle[D];
  const double alpha = std::exp(u);
  double lp = m.a0 * u - m.b0 * alpha + 0.5 * static_cast<double>(D) * u -
              0.5 * alpha * beta.squaredNorm();
  double lik = 0.0;
  for (std::size_t i : batch) {
    const auto r = static_cast<Eigen::Index>(i);
    const double t = m.design.row(r).dot(beta);
    lik += m.labels[r] * t - softplus(t);
  }
  return lp + (static_cast<double>(m.num_data()) / static_cast<double>(batch.size())) * lik;
}

double logreg_full_log_density(const LogisticRegressionPosterior& m, const Vector& particle) {
  std::vector<std::size_t> all(m.num_data());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return logreg_log_density(m, particle, all);
}

double logreg_accuracy(const ParticleEnsemble& ensemble, const Eigen::MatrixXd& test_X,
                       const Eigen::VectorXd& test_y) {
  if (test_X.rows() == 0) throw std::invalid_argument("accuracy needs a non-empty test set");
  if (test_X.rows() != test_y.size()) throw std::invalid_argument("test rows and labels differ");
  if (ensemble.size() == 0) throw std::invalid_argument("accuracy needs at least one particle");
  if (static_cast<Eigen::Index>(ensemble.dim()) != test_X.cols() + 1)
    throw std::invalid_argument("particle dimension does not match test features");
  const auto D = test_X.cols();
  // N x n matrix of logits.
  const Eigen::MatrixXd logits = test_X * ensemble.positions.leftCols(D).transpose();
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double p = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) p += sigmoid(logits(i, k));
    p /= static_cast<double>(logits.cols());
    const double predicted = p >= 0.5 ? 1.0 : 0.0;
    if (predicted == test_y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_X.rows());
}

EpochSampler::EpochSampler(std::size_t data_size, std::size_t batch_size, Rng rng)
    : order_(data_size), batch_size_(batch_size), rng_(rng) {
  if (batch_size == 0 || batch_size > data_size)
    throw std::invalid_argument("minibatch size must lie in [1, N]");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void EpochSampler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<std::size_t> EpochSampler::next() {
  if (cursor_ + batch_size_ > order_.size()) {
    reshuffle();
    ++epoch_;
  }
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size_));
  cursor_ += batch_size_;
  return batch;
}

}  // namespace nvgd
