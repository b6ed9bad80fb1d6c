#include "avl/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace avl::parallel {

namespace {

void run_tasks(std::size_t tasks, int workers, const std::function<void(std::size_t)>& task) {
  if (tasks == 0) return;
  const std::size_t threads =
      std::min<std::size_t>(tasks, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads == 1) {
    for (std::size_t t = 0; t < tasks; ++t) task(t);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_task = std::numeric_limits<std::size_t>::max();
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks) return;
      try {
        task(t);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (t < error_task) {
          error_task = t;
          error = std::current_exception();
        }
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

void for_blocks(std::size_t n, int workers,
                const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  run_tasks(block_count(n), workers, [&](std::size_t b) {
    const std::size_t begin = b * kBlockSize;
    fn(b, begin, std::min(n, begin + kBlockSize));
  });
}

void for_each_index(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  run_tasks(count, workers, fn);
}

}  // namespace avl::parallel
