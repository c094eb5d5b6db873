#include "parallel.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace groundnet {

int worker_count() {
  static const int cached = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("GROUNDNET_THREADS")) {
      const int cap = std::atoi(env);
      if (cap >= 1 && cap < hw) hw = cap;
      if (cap >= 1 && cap > hw) hw = cap;
    }
    return hw;
  }();
  return cached;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::min(worker_count(), n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace groundnet
