#pragma once
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace mfcx {

// Worker cap for parallel_for; 0 means hardware concurrency.
inline std::size_t& max_threads() {
  static std::size_t cap = 0;
  return cap;
}

// Static block partition of [0,n) across hardware threads. Bodies must
// write only to their own indices; reductions happen afterwards on the
// full arrays, sequentially, so results never depend on thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  unsigned hw = std::thread::hardware_concurrency();
  std::size_t nthreads = hw == 0 ? 1 : hw;
  if (max_threads() != 0 && nthreads > max_threads()) nthreads = max_threads();
  if (nthreads > n) nthreads = n == 0 ? 1 : n;
  if (nthreads <= 1 || n < 1024) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  std::size_t chunk = (n + nthreads - 1) / nthreads;
  for (std::size_t t = 0; t < nthreads; ++t) {
    std::size_t lo = t * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(body, lo, hi);
  }
  for (auto& th : pool) th.join();
}

}  // namespace mfcx
