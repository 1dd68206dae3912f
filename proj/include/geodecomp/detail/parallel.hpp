#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace geodecomp::detail {

inline int thread_budget() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("GEODECOMP_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return hw;
}

// Fixed chunk size; results never depend on the number of worker threads.
inline constexpr std::size_t kChunkRows = 4096;

inline std::size_t num_chunks(std::size_t n) { return n == 0 ? 0 : (n - 1) / kChunkRows + 1; }

// Runs f(chunk_index, begin, end) for every chunk of [0, n). Chunk boundaries
// are a pure function of n, so any reduction that combines per-chunk results
// in chunk order is bit-identical for every thread count.
template <typename F>
void for_each_chunk(std::size_t n, F&& f) {
  const std::size_t chunks = num_chunks(n);
  if (chunks == 0) return;
  const int threads = std::min<int>(thread_budget(), static_cast<int>(chunks));
  if (threads <= 1 || n < 2 * kChunkRows) {
    for (std::size_t c = 0; c < chunks; ++c)
      f(c, c * kChunkRows, std::min(n, (c + 1) * kChunkRows));
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t c = static_cast<std::size_t>(t); c < chunks; c += static_cast<std::size_t>(threads))
        f(c, c * kChunkRows, std::min(n, (c + 1) * kChunkRows));
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace geodecomp::detail
