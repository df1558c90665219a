#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

namespace gs4c {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double inv_sigmoid(double y) { return std::log(y / (1.0 - y)); }

// splitmix64, used to derive independent sub-seeds from one master seed so
// that adding a consumer never shifts the streams of existing ones.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  // inclusive bounds
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(engine_);
  }
  size_t index(size_t n) { return static_cast<size_t>(uniform_int(0, static_cast<int64_t>(n) - 1)); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

void set_thread_count(int n);
int thread_count();

// Runs fn(block, begin, end) over [0,n) split into n_blocks contiguous blocks.
// The decomposition is a function of n and n_blocks only, never of the thread
// count, so per-block outputs reduced in block order are reproducible.
void parallel_blocks(size_t n, size_t n_blocks,
                     const std::function<void(size_t, size_t, size_t)>& fn);

}  // namespace gs4c
