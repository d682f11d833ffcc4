#pragma once

// Minimal deterministic parallelism helper. Work items are addressed by
// index; callers write results into index-addressed slots and reduce
// serially afterwards, so the outcome never depends on scheduling.
//
// The PERMAPPROX_THREADS environment variable caps the worker count.

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace permapprox {

namespace detail {
inline int initial_thread_cap() {
  if (const char* env = std::getenv("PERMAPPROX_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline std::atomic<int>& thread_cap_slot() {
  static std::atomic<int> cap{initial_thread_cap()};
  return cap;
}
}  // namespace detail

inline int thread_cap() { return detail::thread_cap_slot().load(); }
inline void set_thread_cap(int cap) { detail::thread_cap_slot().store(cap < 1 ? 1 : cap); }

// Runs fn(i) for i in [0, n). fn must only touch state owned by index i.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int cap = thread_cap();
  if (cap <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(cap)));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace permapprox
