#pragma once

#include <functional>

namespace sgns {

/// Worker count: `requested` if positive, else SPHERE_GNS_THREADS, else the hardware count.
int thread_count(int requested = 0);

/// Runs body(i) for i in [0, n) on up to `threads` workers. The first exception
/// thrown by any body is rethrown after all workers stop.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

}  // namespace sgns
