#pragma once

#include <cstddef>
#include <functional>

namespace fraclab {

/// Worker count: FRACLAB_THREADS if set (>= 1), else hardware concurrency.
unsigned worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Callers write
/// results into per-index slots, so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace fraclab
