#pragma once

#include <functional>

namespace groundnet {

// Worker count for data-parallel sections. Capped by the GROUNDNET_THREADS
// environment variable; defaults to the hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n) across workers with static chunking. Each index
// is processed exactly once; the assignment of indices to workers is fixed,
// so any per-index output slots are filled deterministically.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace groundnet
