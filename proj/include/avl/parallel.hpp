#pragma once

#include <cstddef>
#include <functional>

namespace avl::parallel {

/// Work is always cut into blocks of this many items, independent of the
/// worker count, so per-block partial results are identical for any
/// number of workers.
inline constexpr std::size_t kBlockSize = 256;

inline std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

/// Calls fn(block, begin, end) for every block of [0, n). Blocks are
/// distributed over `workers` threads; fn must only touch per-block state.
/// If any call throws, the exception from the lowest block index is
/// rethrown after all workers finish.
void for_blocks(std::size_t n, int workers,
                const std::function<void(std::size_t block, std::size_t begin, std::size_t end)>& fn);

/// Calls fn(i) for i in [0, count) on up to `workers` threads.
void for_each_index(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace avl::parallel
