#pragma once

#include <algorithm>
#include <cstddef>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace nvgd {

/// Number of particles per work block. Fixed so that block boundaries, and therefore every
/// floating-point reduction order, are independent of the worker count.
inline constexpr std::size_t kParticleBlock = 16;

inline std::size_t block_count(std::size_t n, std::size_t block = kParticleBlock) {
  return (n + block - 1) / block;
}

/// Calls fn(block_index, begin, end) for every block of [0, n). Blocks may run concurrently;
/// callers write per-block partials and reduce them in block order afterwards.
template <class Fn>
void for_each_block(std::size_t n, Fn&& fn, std::size_t block = kParticleBlock) {
  const std::size_t blocks = block_count(n, block);
  if (blocks == 0) return;
  if (blocks == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, blocks, 1),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t b = r.begin(); b != r.end(); ++b) {
                        const std::size_t begin = b * block;
                        fn(b, begin, std::min(n, begin + block));
                      }
                    });
}

}  // namespace nvgd
