#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace framekit {

/// Worker count from FRAMEKIT_THREADS (0 or unset = hardware concurrency).
inline std::size_t thread_count() {
  std::size_t n = 0;
  if (const char* env = std::getenv("FRAMEKIT_THREADS")) {
    try {
      n = static_cast<std::size_t>(std::stoul(env));
    } catch (...) {
      n = 0;
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs fn(chunk, begin, end) over contiguous chunks of [0, count). Chunk ids are dense in
/// [0, chunks) so callers can keep per-chunk accumulators and reduce them in a fixed order.
template <typename Fn>
std::size_t parallel_chunks(std::size_t count, Fn&& fn, std::size_t min_chunk = 256) {
  const std::size_t workers = std::min(thread_count(), std::max<std::size_t>(1, count / min_chunk));
  if (workers <= 1) {
    fn(std::size_t{0}, std::size_t{0}, count);
    return 1;
  }
  const std::size_t step = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * step;
    const std::size_t end = std::min(count, begin + step);
    pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
  for (auto& t : pool) t.join();
  return workers;
}

/// Element-wise parallel loop; fn(i) must only write state owned by index i.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, std::size_t min_chunk = 256) {
  parallel_chunks(
      count,
      [&fn](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      },
      min_chunk);
}

/// Upper bound on the number of chunks parallel_chunks may create.
inline std::size_t max_chunks() { return thread_count(); }

}  // namespace framekit
