#pragma once

#include <cstddef>
#include <functional>

namespace ssimgen {

/// Worker cap: SSIMGEN_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
unsigned worker_count();

/// Runs fn(i) for i in [0, n) across up to worker_count() threads. Callers
/// must write to disjoint outputs; results are then schedule independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ssimgen
