#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tsvsim {

/// Runs body(chunk) for chunk in [0, n_chunks) on up to `workers` threads and
/// returns the per-chunk results in chunk order. Callers reduce the returned
/// vector sequentially, so the result does not depend on the worker count.
template <typename Result, typename Body>
std::vector<Result> map_chunks(std::size_t n_chunks, unsigned workers, Body body) {
  std::vector<Result> results(n_chunks);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n_chunks, 1))));
  if (workers == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) results[c] = body(c);
    return results;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < n_chunks; c += workers) {
        try {
          results[c] = body(c);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
  return (n + chunk_size - 1) / chunk_size;
}

}  // namespace tsvsim
