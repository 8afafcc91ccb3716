#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace skyloss {

/// Runs body(i) for i in [0, count) across `workers` threads using static
/// contiguous chunks. Every index is visited exactly once and results must be
/// written to preassigned slots, so the outcome does not depend on `workers`.
/// The first exception thrown by any worker (lowest chunk wins) is rethrown.
template <typename Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
  workers = std::max(1u, workers);
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(workers, count);
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> pool;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
      pool.emplace_back([&, c] {
        const std::size_t begin = count * c / chunks;
        const std::size_t end = count * (c + 1) / chunks;
        try {
          for (std::size_t i = begin; i < end; ++i) body(i);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace skyloss
