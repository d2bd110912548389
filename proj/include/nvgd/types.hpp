#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nvgd {

using Vector = Eigen::VectorXd;
/// Row-major so that each particle is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when a computation produces NaN or Inf where a finite value is required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n x d particle positions plus the number of updates applied so far.
struct ParticleEnsemble {
  Matrix positions;
  std::uint64_t step = 0;

  ParticleEnsemble() = default;
  explicit ParticleEnsemble(Matrix p, std::uint64_t s = 0) : positions(std::move(p)), step(s) {}

  std::size_t size() const { return static_cast<std::size_t>(positions.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(positions.cols()); }
  bool all_finite() const { return positions.allFinite(); }
};

}  // namespace nvgd
