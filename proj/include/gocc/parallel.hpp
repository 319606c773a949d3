#ifndef GOCC_PARALLEL_HPP
#define GOCC_PARALLEL_HPP

#include <cstddef>
#include <thread>
#include <vector>

namespace gocc {

inline int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(chunk_begin, chunk_end, thread_index) over contiguous chunks of
// [begin, end). Chunk boundaries depend only on (begin, end, threads), so a
// caller that merges per-thread results in thread-index order is
// deterministic for a fixed thread count.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, int threads, Fn&& fn) {
  const std::size_t n = end > begin ? end - begin : 0;
  if (n == 0) return;
  std::size_t t = threads < 1 ? 1 : static_cast<std::size_t>(threads);
  if (t > n) t = n;
  if (t == 1) {
    fn(begin, end, 0);
    return;
  }
  const std::size_t chunk = (n + t - 1) / t;
  std::vector<std::thread> pool;
  pool.reserve(t - 1);
  for (std::size_t i = 1; i < t; ++i) {
    std::size_t lo = begin + i * chunk;
    std::size_t hi = lo + chunk < end ? lo + chunk : end;
    if (lo >= hi) break;
    pool.emplace_back([=, &fn] { fn(lo, hi, static_cast<int>(i)); });
  }
  fn(begin, begin + chunk, 0);
  for (auto& th : pool) th.join();
}

}  // namespace gocc

#endif
