// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bva::detail {

inline constexpr std::size_t kChunkRows = 512;

/// Calls fn(chunk, begin, end) for fixed-size chunks of [0, n) on a few
/// threads. Chunk boundaries do not depend on the thread count, so callers
/// that reduce per-chunk results in chunk order get identical bits.
template <typename Fn>
void for_chunks(std::size_t n, Fn&& fn) {
  const std::size_t chunks = (n + kChunkRows - 1) / kChunkRows;
  const std::size_t workers =
      std::min<std::size_t>(chunks, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, c * kChunkRows, std::min(n, (c + 1) * kChunkRows));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = next++; c < chunks; c = next++) {
          fn(c, c * kChunkRows, std::min(n, (c + 1) * kChunkRows));
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::size_t num_chunks(std::size_t n) { return (n + kChunkRows - 1) / kChunkRows; }

}  // namespace bva::detail
