#pragma once

#include <span>
#include <vector>

#include "nvgd/random.hpp"
#include "nvgd/targets.hpp"

namespace nvgd {

/// Bayesian logistic regression with alpha ~ Gamma(a0, b0) (rate b0), beta ~ N(0, I / alpha).
///
/// A particle is (beta_0..beta_{D-1}, log alpha), D = design.cols() (bias column included).
/// The density is taken over log alpha, so it carries the extra +log alpha Jacobian term.
struct LogisticRegressionPosterior {
  Eigen::MatrixXd design;  // N x D
  Eigen::VectorXd labels;  // N, entries 0/1
  double a0 = 1.0;
  double b0 = 0.01;
  std::size_t batch = 128;

  LogisticRegressionPosterior() = default;
  LogisticRegressionPosterior(Eigen::MatrixXd design, Eigen::VectorXd labels, double a0,
                              double b0, std::size_t batch);

  std::size_t num_data() const { return static_cast<std::size_t>(design.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(design.cols()) + 1; }
};

/// Score of log prior + (N / |batch|) * minibatch log-likelihood. Throws on an empty batch.
Vector logreg_score(const LogisticRegressionPosterior& m, const Vector& particle,
                    std::span<const std::size_t> batch);
/// Prior-only score (no likelihood term).
Vector logreg_prior_score(const LogisticRegressionPosterior& m, const Vector& particle);
/// Full-data score; equals logreg_score with the batch set to every row.
Vector logreg_full_score(const LogisticRegressionPosterior& m, const Vector& particle);

double logreg_log_density(const LogisticRegressionPosterior& m, const Vector& particle,
                          std::span<const std::size_t> batch);
double logreg_full_log_density(const LogisticRegressionPosterior& m, const Vector& particle);

/// Predictive rule: average sigmoid(x^T beta) over particles, predict 1 when >= 1/2.
double logreg_accuracy(const ParticleEnsemble& ensemble, const Eigen::MatrixXd& test_X,
                       const Eigen::VectorXd& test_y);

/// Uniform minibatches without replacement within an epoch, reshuffled every epoch.
/// A trailing partial batch is dropped.
class EpochSampler {
 public:
  EpochSampler(std::size_t data_size, std::size_t batch_size, Rng rng);
  std::vector<std::size_t> next();
  std::size_t epoch() const { return epoch_; }

 private:
  void reshuffle();

  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  Rng rng_;
};

class LogisticTarget final : public ScoreModel {
 public:
  explicit LogisticTarget(LogisticRegressionPosterior m) : m_(std::move(m)) {}

  std::string name() const override { return "logistic"; }
  std::size_t dim() const override { return m_.dim(); }
  Capabilities capabilities() const override { return {true, false, true}; }
  Vector score(const Vector& x) const override { return logreg_full_score(m_, x); }
  Vector score(const Vector& x, std::span<const std::size_t> batch) const override {
    return logreg_score(m_, x, batch);
  }
  std::size_t data_size() const override { return m_.num_data(); }
  std::size_t batch_size() const override { return m_.batch; }
  double log_density(const Vector& x) const override { return logreg_full_log_density(m_, x); }
  const LogisticRegressionPosterior& model() const { return m_; }

 private:
  LogisticRegressionPosterior m_;
};

}  // namespace nvgd
