#pragma once

#include <functional>

namespace ge2ae {

// Worker cap from GE2AE_THREADS; 0 means fully sequential (the determinism
// reference mode). Unset defaults to the hardware concurrency.
int worker_threads();

// Runs fn(0..n_items-1) across workers. Item outputs must go to per-index
// slots so the result is independent of scheduling.
void parallel_for(int n_items, const std::function<void(int)>& fn);

}  // namespace ge2ae
