#include "ge2ae/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ge2ae {

int worker_threads() {
  const char* env = std::getenv("GE2AE_THREADS");
  if (env) {
    const int v = std::atoi(env);
    return v < 0 ? 0 : v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int n_items, const std::function<void(int)>& fn) {
  const int workers = worker_threads();
  if (workers <= 1 || n_items <= 1) {
    for (int i = 0; i < n_items; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_items) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const int t = workers < n_items ? workers : n_items;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) threads.emplace_back(body);
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ge2ae
