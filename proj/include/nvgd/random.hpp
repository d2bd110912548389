#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "nvgd/types.hpp"

namespace nvgd {

using Rng = std::mt19937_64;

/// Named consumers of randomness. Each one gets its own generator so that adding or removing
/// draws in one consumer never shifts the draws seen by another.
enum class Stream : std::uint64_t {
  ensemble_init = 1,
  witness_init = 2,
  split = 3,
  hutchinson = 4,
  langevin = 5,
  minibatch = 6,
  reference = 7,
};

std::string_view stream_name(Stream s);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed for (root, stream, counter): three rounds of SplitMix64 over the tuple.
std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t counter = 0);

Rng make_rng(std::uint64_t root, Stream stream, std::uint64_t counter = 0);

/// Fills a rows x cols matrix with independent standard normals in row-major order.
Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace nvgd
