#include "gsreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace gsreg {

namespace {

std::atomic<int> g_threads{0};

}  // namespace

void set_num_threads(int threads) { g_threads = std::max(0, threads); }

int num_threads() {
  const int t = g_threads.load();
  if (t > 0) return t;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t, int)>& fn) {
  const int workers = static_cast<int>(std::min<std::size_t>(num_threads(), std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    fn(0, n, 0);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, begin, end, w] {
      try {
        fn(begin, end, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace gsreg
