#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace transit_robust {

// Thread count from an explicit value, else TRANSIT_ROBUST_THREADS, else the
// hardware concurrency.
inline unsigned resolve_threads(std::optional<unsigned> requested = std::nullopt) {
  if (requested && *requested > 0) return *requested;
  if (const char* env = std::getenv("TRANSIT_ROBUST_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Evaluates fn(0..n-1) on up to `threads` workers. Results are stored by
// index, so the output never depends on scheduling. The exception of the
// lowest failing index is rethrown.
template <class F>
auto parallel_map(std::size_t n, unsigned threads, F&& fn) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
  using R = std::invoke_result_t<F&, std::size_t>;
  std::vector<R> out(n);
  if (n == 0) return out;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::size_t err_index = n;
  std::exception_ptr err;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace transit_robust
