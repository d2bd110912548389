#include "nvgd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nvgd/parallel.hpp"

namespace nvgd {

KernelSpec::KernelSpec(double h) : bandwidth(h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("kernel bandwidth must be positive");
}

double KernelSpec::operator()(const Eigen::Ref<const Vector>& x,
                              const Eigen::Ref<const Vector>& y) const {
  return of_squared_distance((x - y).squaredNorm());
}

double median_heuristic(const Matrix& particles) {
  const Eigen::Index n = particles.rows();
  if (n < 2) throw std::invalid_argument("median heuristic needs at least 2 particles");
  std::vector<double> sq;
  sq.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      sq.push_back((particles.row(i) - particles.row(j)).squaredNorm());
  const std::size_t m = sq.size();
  const std::size_t mid = m / 2;
  std::nth_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(mid), sq.end());
  double med2 = sq[mid];
  if (m % 2 == 0) {
    const double lower = *std::max_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(mid));
    med2 = 0.5 * (lower + med2);
  }
  if (!(med2 > 0.0))
    throw std::invalid_argument("median heuristic: median pairwise distance is zero; supply a fixed bandwidth");
  return std::sqrt(med2 / (2.0 * std::log(static_cast<double>(n))));
}

namespace {

// sum_{i,j} k(a_i, b_j), reduced over fixed row blocks of A.
double kernel_sum(const Matrix& A, const Matrix& B, const KernelSpec& kernel) {
  const auto n = static_cast<std::size_t>(A.rows());
  std::vector<double> partial(block_count(n), 0.0);
  for_each_block(n, [&](std::size_t blk, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      for (Eigen::Index j = 0; j < B.rows(); ++j)
        s += kernel.of_squared_distance((A.row(r) - B.row(j)).squaredNorm());
    }
    partial[blk] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

double mmd_squared(const Matrix& X, const Matrix& Y, const KernelSpec& kernel) {
  if (X.rows() == 0 || Y.rows() == 0) throw std::invalid_argument("MMD needs non-empty sets");
  if (X.cols() != Y.cols()) throw std::invalid_argument("MMD: dimension mismatch");
  const double nx = static_cast<double>(X.rows());
  const double ny = static_cast<double>(Y.rows());
  const double kxx = kernel_sum(X, X, kernel) / (nx * nx);
  const double kyy = kernel_sum(Y, Y, kernel) / (ny * ny);
  const double kxy = kernel_sum(X, Y, kernel) / (nx * ny);
  return kxx + kyy - 2.0 * kxy;
}

MonteCarloEstimate monte_carlo(const Vector& samples) {
  const auto n = static_cast<double>(samples.size());
  if (samples.size() == 0) return {};
  MonteCarloEstimate e;
  e.mean = samples.mean();
  if (samples.size() > 1) {
    const double var = (samples.array() - e.mean).square().sum() / (n - 1.0);
    e.std_error = std::sqrt(var / n);
  }
  return e;
}

MonteCarloEstimate stein_discrepancy_of_field(const VectorField& field, const Matrix& particles,
                                              const Matrix& scores) {
  if (particles.rows() != scores.rows() || particles.cols() != scores.cols())
    throw std::invalid_argument("particles and scores shapes differ");
  Vector terms(particles.rows());
  for (Eigen::Index i = 0; i < particles.rows(); ++i) {
    const FieldPoint fp = field(particles.row(i).transpose());
    terms[i] = fp.value.dot(scores.row(i).transpose()) + fp.divergence;
  }
  return monte_carlo(terms);
}

VectorField witness_field(const WitnessParams& params) {
  return [params](const Vector& x) {
    return FieldPoint{forward(params, x), exact_divergence(params, x)};
  };
}

MonteCarloEstimate optimal_rsd_oracle(const DiagonalGaussian& q, const DiagonalGaussian& p,
                                      std::size_t n_mc, std::uint64_t seed) {
  if (q.dim() != p.dim()) throw std::invalid_argument("oracle: q and p dimensions differ");
  if (n_mc == 0) throw std::invalid_argument("oracle needs at least one sample");
  const Matrix xs = gaussian_sample(q, n_mc, seed);
  Vector terms(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const Vector x = xs.row(i).transpose();
    terms[i] = 0.5 * (gaussian_score(p, x) - gaussian_score(q, x)).squaredNorm();
  }
  return monte_carlo(terms);
}

double optimal_rsd_closed_form(const DiagonalGaussian& q, const DiagonalGaussian& p) {
  if (q.dim() != p.dim()) throw std::invalid_argument("oracle: q and p dimensions differ");
  // f*_i(x) = a_i x_i + c_i with x_i ~ N(mu_q, s_q): E f*^2 = (a mu_q + c)^2 + a^2 s_q.
  double total = 0.0;
  for (Eigen::Index i = 0; i < q.mean.size(); ++i) {
    const double a = 1.0 / q.variances[i] - 1.0 / p.variances[i];
    const double c = p.mean[i] / p.variances[i] - q.mean[i] / q.variances[i];
    const double m = a * q.mean[i] + c;
    total += m * m + a * a * q.variances[i];
  }
  return 0.5 * total;
}

IdentityCheck ibp_identity_check(const WitnessParams& params, const DiagonalGaussian& q,
                                 std::size_t n_mc, std::uint64_t seed) {
  if (params.dim() != q.dim()) throw std::invalid_argument("identity check: dimension mismatch");
  if (n_mc < 2) throw std::invalid_argument("identity check needs at least two samples");
  const Matrix xs = gaussian_sample(q, n_mc, seed);
  const auto n = static_cast<std::size_t>(xs.rows());
  Vector div(xs.rows()), proj(xs.rows());
  for_each_block(n, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      const Vector x = xs.row(i).transpose();
      div[i] = exact_divergence(params, x);
      proj[i] = -forward(params, x).dot(gaussian_score(q, x));
    }
  });
  IdentityCheck c;
  c.lhs = div.mean();
  c.rhs = proj.mean();
  c.std_error = monte_carlo(div - proj).std_error;
  c.pass = std::abs(c.lhs - c.rhs) <= kIdentityCheckSigmas * c.std_error;
  return c;
}

}  // namespace nvgd
