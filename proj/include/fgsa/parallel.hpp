#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace fgsa {

/** Worker count: 0 resolves to the hardware concurrency (at least 1). */
inline int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/**
 * Runs fn(i) for i in [0,n) on up to `jobs` threads. Indices are handed out
 * in contiguous blocks; fn must only write state owned by index i. The first
 * exception (by thread launch order) is rethrown.
 */
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::min(resolve_jobs(jobs), std::max(n, 1));
  if (n <= 0) return;
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  const int chunk = (n + jobs - 1) / jobs;
  for (int w = 0; w < jobs; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, w, &fn, &errors] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/**
 * Split [0,n) into fixed blocks of `block_size`, run map(begin, end) over the
 * blocks in parallel, then fold the block values serially in block order:
 * reduce(block_index, value). Block boundaries depend only on block_size, so
 * any accumulation done this way is bit-identical for every worker count.
 */
template <class T>
void block_map_reduce(int n, int jobs, int block_size, const std::function<T(int, int)>& map,
                      const std::function<void(int, T&&)>& reduce) {
  if (n <= 0) return;
  block_size = std::max(1, block_size);
  const int n_blocks = (n + block_size - 1) / block_size;
  std::vector<T> values(static_cast<std::size_t>(n_blocks));
  parallel_for(n_blocks, jobs, [&](int b) {
    values[static_cast<std::size_t>(b)] = map(b * block_size, std::min(n, (b + 1) * block_size));
  });
  for (int b = 0; b < n_blocks; ++b) reduce(b, std::move(values[static_cast<std::size_t>(b)]));
}

}  // namespace fgsa
