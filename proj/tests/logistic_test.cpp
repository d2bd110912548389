#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "nvgd/logistic.hpp"
#include "test_util.hpp"

using namespace nvgd;
using nvgd::testing::random_matrix;
using nvgd::testing::random_vector;
using nvgd::testing::relative_error;

namespace {

LogisticRegressionPosterior toy_model(std::size_t n, std::size_t features, std::uint64_t seed,
                                      std::size_t batch = 4) {
  Eigen::MatrixXd X = random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(features), seed);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = X(i, 0) > 0 ? 1.0 : 0.0;
  return LogisticRegressionPosterior(X, y, 1.0, 0.01, batch);
}

Vector fd_log_density_gradient(const LogisticRegressionPosterior& m, const Vector& x,
                               std::span<const std::size_t> batch, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (logreg_log_density(m, xp, batch) - logreg_log_density(m, xm, batch)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(LogregScore, PriorModeInBeta) {
  const LogisticRegressionPosterior m = toy_model(5, 3, 1);
  const Vector s = logreg_prior_score(m, Vector::Zero(4));
  EXPECT_TRUE(s.head(3).isZero(0.0));
  // a0 - b0 + D/2 at log alpha = 0, beta = 0.
  EXPECT_DOUBLE_EQ(s[3], 1.0 - 0.01 + 1.5);
}

TEST(LogregScore, SingleObservationTwoFeaturesMatchesFiniteDifferences) {
  Eigen::MatrixXd X(1, 2);
  X << 0.7, 1.0;
  const LogisticRegressionPosterior m(X, Eigen::VectorXd::Ones(1), 1.0, 0.01, 1);
  const Vector particle = (Vector(3) << 0.3, -0.2, 0.4).finished();
  const std::size_t batch[] = {0};
  const Vector s = logreg_score(m, particle, batch);
  const Vector fd = fd_log_density_gradient(m, particle, batch);
  for (int i = 0; i < 3; ++i) EXPECT_LT(relative_error(s[i], fd[i]), 1e-6);
  // Hand value for the first beta component: -alpha beta_0 + (1 - sigmoid(x^T beta)) x_0.
  const double t = 0.7 * 0.3 - 0.2;
  EXPECT_NEAR(s[0], -std::exp(0.4) * 0.3 + (1.0 - 1.0 / (1.0 + std::exp(-t))) * 0.7, 1e-15);
}

TEST(LogregScore, MatchesFiniteDifferencesAtRandomPoints) {
  const LogisticRegressionPosterior m = toy_model(40, 4, 2, 8);
  const std::vector<std::size_t> batch{3, 17, 5, 22, 39, 0, 11, 8};
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const Vector x = random_vector(5, 100 + trial, 0.5);
    const Vector s = logreg_score(m, x, batch);
    const Vector fd = fd_log_density_gradient(m, x, batch);
    for (int i = 0; i < 5; ++i) EXPECT_LT(relative_error(s[i], fd[i], 1e-3), 1e-6) << "trial " << trial;
  }
}

TEST(LogregScore, FullBatchEqualsExactScore) {
  const LogisticRegressionPosterior m = toy_model(12, 3, 3, 12);
  std::vector<std::size_t> all(12);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Vector x = random_vector(4, 5);
  EXPECT_EQ(logreg_score(m, x, all), logreg_full_score(m, x));
  EXPECT_EQ(logreg_full_score(m, x), logreg_full_score(m, x));
  const LogisticTarget target(m);
  EXPECT_EQ(target.score(x), logreg_full_score(m, x));
}

TEST(LogregScore, MinibatchIsScaledByDataOverBatch) {
  const LogisticRegressionPosterior m = toy_model(10, 2, 4, 2);
  const Vector x = random_vector(3, 6);
  const std::size_t one[] = {7};
  const Vector prior = logreg_prior_score(m, x);
  const Vector s = logreg_score(m, x, one);
  const double t = m.design.row(7).dot(x.head(2));
  const Vector expected_lik = 10.0 * (m.labels[7] - 1.0 / (1.0 + std::exp(-t))) * m.design.row(7).transpose();
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(s[i] - prior[i], expected_lik[i], 1e-12);
  EXPECT_EQ(s[2], prior[2]);
}

TEST(LogregScore, SaturatedSigmoidIsStable) {
  Eigen::MatrixXd X(1, 1);
  X << 1.0;
  const LogisticRegressionPosterior m(X, Eigen::VectorXd::Ones(1), 1.0, 0.01, 1);
  const Vector particle = (Vector(2) << 500.0, 0.0).finished();
  const std::size_t batch[] = {0};
  const Vector s = logreg_score(m, particle, batch);
  ASSERT_TRUE(s.allFinite());
  EXPECT_NEAR(s[0] - logreg_prior_score(m, particle)[0], 0.0, 1e-200);
  EXPECT_TRUE(std::isfinite(logreg_log_density(m, particle, batch)));
  const Vector flipped = (Vector(2) << -500.0, 0.0).finished();
  EXPECT_TRUE(std::isfinite(logreg_log_density(m, flipped, batch)));
}

TEST(LogregScore, RejectsEmptyBatchAndBadModels) {
  const LogisticRegressionPosterior m = toy_model(4, 2, 5, 2);
  EXPECT_THROW(logreg_score(m, Vector::Zero(3), std::span<const std::size_t>{}), std::invalid_argument);
  const std::size_t out_of_range[] = {4};
  EXPECT_THROW(logreg_score(m, Vector::Zero(3), out_of_range), std::out_of_range);
  EXPECT_THROW(LogisticRegressionPosterior(m.design, Eigen::VectorXd::Constant(4, 0.5), 1, 0.01, 2),
               std::invalid_argument);
  EXPECT_THROW(LogisticRegressionPosterior(m.design, m.labels, 1, 0.01, 5), std::invalid_argument);
}

TEST(LogregAccuracy, ZeroParticleTiesBreakTowardClassOne) {
  Eigen::MatrixXd X = random_matrix(7, 2, 1);
  Eigen::VectorXd y(7);
  y << 1, 0, 1, 1, 0, 0, 1;
  ParticleEnsemble e(Matrix::Zero(1, 3));
  EXPECT_DOUBLE_EQ(logreg_accuracy(e, X, y), 4.0 / 7.0);
}

TEST(LogregAccuracy, SeparableLargeMargin) {
  Eigen::MatrixXd X(4, 2);
  X << 2, 1, 3, 1, -2, 1, -4, 1;
  Eigen::VectorXd y(4);
  y << 1, 1, 0, 0;
  Matrix p(1, 3);
  p << 10.0, 0.0, 0.0;
  EXPECT_EQ(logreg_accuracy(ParticleEnsemble(p), X, y), 1.0);
}

TEST(LogregAccuracy, TwoParticlesMatchEnumeration) {
  const Eigen::MatrixXd X = random_matrix(30, 3, 7);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = i % 3 == 0 ? 1.0 : 0.0;
  const Matrix p = random_matrix(2, 4, 8);
  std::size_t correct = 0;
  for (int i = 0; i < 30; ++i) {
    double prob = 0.0;
    for (int k = 0; k < 2; ++k) {
      double t = 0.0;
      for (int j = 0; j < 3; ++j) t += X(i, j) * p(k, j);
      prob += 0.5 / (1.0 + std::exp(-t));
    }
    if ((prob >= 0.5 ? 1.0 : 0.0) == y[i]) ++correct;
  }
  EXPECT_DOUBLE_EQ(logreg_accuracy(ParticleEnsemble(p), X, y), static_cast<double>(correct) / 30.0);
  EXPECT_THROW(logreg_accuracy(ParticleEnsemble(p), Eigen::MatrixXd(0, 3), Eigen::VectorXd(0)),
               std::invalid_argument);
}

TEST(EpochSampler, CoversEveryIndexOncePerEpoch) {
  EpochSampler s(10, 3, Rng(4));
  std::multiset<std::size_t> seen;
  for (int b = 0; b < 3; ++b)
    for (std::size_t i : s.next()) seen.insert(i);
  EXPECT_EQ(seen.size(), 9u);
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 9u);
  EXPECT_EQ(s.epoch(), 0u);
  s.next();
  EXPECT_EQ(s.epoch(), 1u);
}

TEST(EpochSampler, DeterministicGivenRng) {
  EpochSampler a(50, 7, Rng(9)), b(50, 7, Rng(9));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.next(), b.next());
}
