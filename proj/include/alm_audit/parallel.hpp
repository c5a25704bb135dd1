#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace alm_audit {

// Runs fn(i) for i in [0, count) on at most `limit` threads. Work is claimed
// by index, so callers that write results into slot i get an order-independent
// outcome. The first exception thrown by fn is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t limit, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(limit, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace alm_audit
