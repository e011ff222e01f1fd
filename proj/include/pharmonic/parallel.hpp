#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace pharmonic {

/// Runs fn(row) for every row in [0, rows) on up to `threads` threads.
/// Rows are split into fixed contiguous blocks; callers that reduce must keep
/// per-row partials and sum them in row order so results do not depend on the
/// thread count.
template <class Fn>
void parallel_rows(int rows, int threads, Fn&& fn) {
  if (threads <= 1 || rows < 2 * threads) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  int block = (rows + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int lo = t * block, hi = std::min(rows, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int r = lo; r < hi; ++r) fn(r);
    });
  }
}

/// Ordered sum of per-row partials.
inline double ordered_sum(const std::vector<double>& partials) {
  double s = 0.0;
  for (double v : partials) s += v;
  return s;
}

}  // namespace pharmonic
