#pragma once

#include <cstddef>
#include <functional>

namespace cloze {

// Worker count: CLOZE_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count() noexcept;

// Calls fn(i) for i in [0, n) across worker_count() threads in contiguous
// chunks. fn must only write state owned by index i. The first exception
// (lowest index among those observed) is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cloze
