#pragma once

#include <cstddef>
#include <functional>

namespace scoopsim {

// Worker count: hardware concurrency, capped by SCOOPSIM_THREADS when set.
unsigned worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Indices are
// handed out in order; the first exception thrown is rethrown after all
// workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace scoopsim
