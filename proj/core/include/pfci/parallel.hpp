#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace pfci {

/// Runs fn(i) for i in [0, n) over at most `jobs` threads with a static contiguous
/// partition. Each index is visited exactly once, so results written per index do not
/// depend on the thread count. The first exception thrown by any worker is rethrown.
template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  if (n <= 0) return;
  jobs = std::clamp(jobs, 1, n);
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    const int begin = static_cast<int>(static_cast<long>(n) * t / jobs);
    const int end = static_cast<int>(static_cast<long>(n) * (t + 1) / jobs);
    workers.emplace_back([&, t, begin, end] {
      try {
        for (int i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace pfci
