#pragma once

#include <cstddef>
#include <functional>

namespace doelens {

/// Worker count used by parallel_for. Defaults to DOELENS_THREADS when set,
/// otherwise std::thread::hardware_concurrency().
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs fn(i) for i in [0, n) across thread_count() workers using static
/// contiguous partitioning. fn must only write state owned by index i, so
/// results do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Keeps freed large blocks in the heap instead of returning them to the OS,
/// so per-step training buffers are recycled without fresh page faults.
/// Idempotent; a no-op outside glibc.
void retain_heap_memory();

}  // namespace doelens
