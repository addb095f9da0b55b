#pragma once

#include <cstddef>
#include <functional>

namespace potpred {

/// Worker count from POTPRED_THREADS, else the hardware concurrency (at least 1).
unsigned default_thread_count();

/**
 * Runs body(i) for i in [0, n) on up to `threads` workers (0 = default).
 * Indices are handed out dynamically; callers write results into slot i so
 * the outcome does not depend on scheduling. The exception thrown by the
 * lowest failing index is rethrown after all workers finish.
 */
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned threads = 0);

}  // namespace potpred
