#pragma once

#include <functional>

namespace rbfpdm {

/// Worker cap: RBFPDM_THREADS when set to a positive integer, otherwise the
/// hardware concurrency. set_worker_count() overrides both (0 restores them).
int worker_count();
void set_worker_count(int workers);

/// Runs body(0) .. body(n - 1) on up to worker_count() threads. Each index is
/// visited exactly once; the first exception thrown is rethrown on the caller.
void parallel_for(int n, const std::function<void(int)> &body);

}  // namespace rbfpdm
