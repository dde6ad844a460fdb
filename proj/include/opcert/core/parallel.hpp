#pragma once

#include <cstddef>
#include <functional>

namespace opcert {

/// Worker count: OPCERT_THREADS if set, else hardware concurrency (>= 1).
std::size_t default_worker_count();

/// Runs task(i) for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; the first exception thrown (lowest index) is rethrown after
/// all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& task);

}  // namespace opcert
