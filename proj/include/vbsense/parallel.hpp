#pragma once

#include <thread>
#include <vector>

namespace vbsense {

/// Static row partitioning over [0, n). fn(k) must be pure per index;
/// results are written to disjoint slots so the outcome is independent of
/// the thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  const auto nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t w = 0; w < nt; ++w) {
    pool.emplace_back([=] {
      for (std::size_t k = w; k < n; k += nt) fn(k);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace vbsense
