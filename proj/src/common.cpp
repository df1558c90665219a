#include "gs4c/common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace gs4c {

namespace {
std::atomic<int> g_threads{0};  // 0 = pick from hardware
}

void set_thread_count(int n) { g_threads.store(std::max(0, n)); }

int thread_count() {
  int n = g_threads.load();
  if (n > 0) return n;
  unsigned hc = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp<unsigned>(hc, 1u, 16u));
}

void parallel_blocks(size_t n, size_t n_blocks,
                     const std::function<void(size_t, size_t, size_t)>& fn) {
  if (n == 0) return;
  n_blocks = std::min(n_blocks, n);
  if (n_blocks == 0) n_blocks = 1;

  auto run_block = [&](size_t b) {
    size_t begin = n * b / n_blocks;
    size_t end = n * (b + 1) / n_blocks;
    fn(b, begin, end);
  };

  int workers = std::min<int>(thread_count(), static_cast<int>(n_blocks));
  if (workers <= 1) {
    for (size_t b = 0; b < n_blocks; ++b) run_block(b);
    return;
  }

  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        size_t b = next.fetch_add(1);
        if (b >= n_blocks) return;
        run_block(b);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace gs4c
