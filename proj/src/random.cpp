#include "nvgd/random.hpp"

namespace nvgd {

std::string_view stream_name(Stream s) {
  switch (s) {
    case Stream::ensemble_init: return "ensemble-init";
    case Stream::witness_init: return "witness-init";
    case Stream::split: return "split";
    case Stream::hutchinson: return "hutchinson";
    case Stream::langevin: return "langevin";
    case Stream::minibatch: return "minibatch";
    case Stream::reference: return "reference";
  }
  return "unknown";
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t counter) {
  std::uint64_t h = mix64(root);
  h = mix64(h ^ static_cast<std::uint64_t>(stream));
  return mix64(h ^ counter);
}

Rng make_rng(std::uint64_t root, Stream stream, std::uint64_t counter) {
  return Rng(derive_seed(root, stream, counter));
}

Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

}  // namespace nvgd
