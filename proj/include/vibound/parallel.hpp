#ifndef VIBOUND_PARALLEL_HPP
#define VIBOUND_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace vibound {

/// Worker cap for parallel loops. Defaults to VIBOUND_THREADS when set,
/// otherwise the hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/**
 * Runs body(i) for i in [0, n) over contiguous chunks.
 *
 * Work assignment never changes what body(i) computes, so results written
 * per index are identical for any thread count. Exceptions thrown by body
 * are rethrown on the calling thread (first one wins).
 */
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace vibound

#endif
