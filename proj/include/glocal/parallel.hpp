#pragma once

#include <cstddef>
#include <functional>

namespace glocal {

// Process-wide cap on worker threads used by parallel sections.
// Zero restores the default (hardware concurrency).
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(begin, end) over disjoint contiguous ranges covering [0, n).
// Callers only write to per-index slots, so results never depend on the
// number of workers; any reduction happens afterwards in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 64);

}  // namespace glocal
