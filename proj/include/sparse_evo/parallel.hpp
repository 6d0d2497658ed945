#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace sparse_evo {

/// Thread budget from SPARSE_EVO_THREADS; 1 when unset or unparsable.
inline unsigned thread_budget() {
  const char* env = std::getenv("SPARSE_EVO_THREADS");
  if (env == nullptr) return 1;
  try {
    const long v = std::stol(env);
    return v > 0 ? static_cast<unsigned>(v) : 1u;
  } catch (...) {
    return 1;
  }
}

/// Runs body(i) for i in [0, n). Work items are independent, so the result
/// does not depend on the thread count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, unsigned threads = thread_budget()) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace sparse_evo
