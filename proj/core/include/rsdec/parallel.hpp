#pragma once

#include <cstddef>
#include <functional>

namespace rsdec {

// Number of worker threads to use when the caller passes 0.
unsigned default_thread_count() noexcept;

// Calls body(i) for every i in [0, count) on up to `threads` workers. Work
// items are claimed dynamically; the body must write results into slots
// owned by index i. If any call throws, the exception from the smallest
// failing index is rethrown after all workers finish, so failures are
// reported the same way regardless of scheduling.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace rsdec
