#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace regen {

// Run fn(i) for i in [0, n) on up to `threads` workers. Work items own
// disjoint output slots, so the result is independent of scheduling.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min(threads, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::int64_t next_pow2(double x) {
  std::int64_t p = 1;
  while (static_cast<double>(p) < x) p *= 2;
  return p;
}

inline int log2_exact(std::int64_t p) {
  int l = 0;
  while ((std::int64_t(1) << l) < p) ++l;
  return l;
}

}  // namespace regen
