#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace tvarch {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> n{0};
  return n;
}
inline thread_local bool in_worker = false;
}  // namespace detail

/// 0 selects std::thread::hardware_concurrency().
inline void set_thread_count(unsigned n) { detail::thread_setting() = n; }

inline unsigned thread_count() {
  const unsigned n = detail::thread_setting();
  if (n != 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(k) for k in [0, n). Each index is handled by exactly one worker
/// and results must be written to per-index slots, so the outcome does not
/// depend on the number of threads. If several bodies throw, the exception
/// of the smallest index is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  // Nested calls run inline on the calling worker.
  const std::size_t workers = detail::in_worker ? 1 : std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    const bool outer = detail::in_worker;
    detail::in_worker = true;
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= n) break;
      try {
        body(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    detail::in_worker = outer;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace tvarch
