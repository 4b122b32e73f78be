#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ordst {

/// Runs task(k) for k in [0, n) on a bounded pool of `workers` threads.
/// Tasks are pulled from a shared counter; each task must own its state.
/// The first exception thrown by any task is rethrown after all threads join.
template <typename Task>
void parallel_for(std::size_t n, std::size_t workers, Task&& task) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (n == 0) return;
  if (workers == 1) {
    for (std::size_t k = 0; k < n; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t k = next.fetch_add(1); k < n; k = next.fetch_add(1)) {
      try {
        task(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ordst
