#pragma once

#include <cstddef>
#include <functional>

namespace lhts::numerics {

/// Worker count from LHTS_THREADS (default: hardware concurrency, at least 1).
std::size_t worker_count();

/// Calls body(i) for i in [0, n) across up to `workers` threads. Each index is
/// visited exactly once; callers write results to index-owned slots so the
/// outcome is independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t workers = worker_count());

}  // namespace lhts::numerics
