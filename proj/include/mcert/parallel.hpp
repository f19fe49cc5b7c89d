#ifndef MCERT_PARALLEL_HPP
#define MCERT_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mcert {

/// Number of worker threads used by parallel_for; 0 means hardware concurrency.
inline std::size_t &thread_count_setting() {
  static std::size_t n = 0;
  return n;
}

inline std::size_t effective_threads(std::size_t work) {
  std::size_t t = thread_count_setting();
  if (t == 0)
    t = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(t, work));
}

/// Calls fn(i) for i in [0, n) over contiguous chunks. Callers write results
/// by index and reduce in index order, so output does not depend on the
/// thread count. The first exception thrown by any worker is rethrown.
template <class Fn> void parallel_for(std::size_t n, Fn &&fn) {
  const std::size_t threads = effective_threads(n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi)
      break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i)
          fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error)
          error = std::current_exception();
      }
    });
  }
  for (auto &th : pool)
    th.join();
  if (error)
    std::rethrow_exception(error);
}

} // namespace mcert

#endif
