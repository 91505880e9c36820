#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace blendnet {

// Worker count: BLENDNET_THREADS wins if set, else hardware concurrency.
inline size_t thread_budget() {
  if (const char* env = std::getenv("BLENDNET_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<size_t>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Static block partition of [0, n). Each index is handled exactly once and
// workers never share output slots, so results are identical for any worker
// count; only wall-clock changes.
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
  size_t workers = std::min(thread_budget(), n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  size_t chunk = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    size_t lo = w * chunk;
    size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace blendnet
