#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fibermc {

/// Worker count to use when the caller passes 0.
inline unsigned default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// Runs body(worker, unit) for unit in [0, units) on up to `threads` workers.
/// Units are handed out dynamically, so a body must not depend on which worker
/// runs it beyond using the worker index to select private scratch. The first
/// exception thrown by a body is rethrown after all workers have joined.
template <class Body>
void parallel_for_units(std::size_t units, unsigned threads, Body&& body) {
  if (threads == 0) threads = default_threads();
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(units, 1)));
  if (workers <= 1) {
    for (std::size_t u = 0; u < units; ++u) body(0u, u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&](unsigned worker) {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const std::size_t u = next.fetch_add(1, std::memory_order_relaxed);
      if (u >= units) return;
      try {
        body(worker, u);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Worker count actually used by parallel_for_units for the given inputs.
inline unsigned effective_workers(std::size_t units, unsigned threads) {
  if (threads == 0) threads = default_threads();
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(threads, units)));
}

}  // namespace fibermc
