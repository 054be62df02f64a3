#pragma once

#include <cstddef>
#include <functional>

namespace dfd {

// Runs fn(i) for every i in [0, n) across `threads` workers (0 = auto).
// Callers must write results to per-index slots; the work split then never
// affects the output, so parallel runs stay bit-reproducible.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

// Worker count: explicit request, else DFD_THREADS env var, else
// hardware_concurrency.
int resolve_threads(int requested);

}  // namespace dfd
