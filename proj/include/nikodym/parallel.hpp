#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace nikodym {

/// Runs fn(0..count-1) on up to `threads` threads. Results must be written by
/// index; the first failing index (not the first failure in time) is rethrown.
template <class Fn>
void parallel_for(long count, unsigned threads, Fn &&fn) {
  if (threads <= 1 || count <= 1) {
    for (long k = 0; k < count; ++k)
      fn(k);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
  auto worker = [&] {
    for (;;) {
      long k = next++;
      if (k >= count)
        return;
      try {
        fn(k);
      } catch (...) {
        errors[static_cast<size_t>(k)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads && t < static_cast<unsigned>(count); ++t)
    pool.emplace_back(worker);
  worker();
  for (auto &t : pool)
    t.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
}

} // namespace nikodym
