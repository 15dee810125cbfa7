#pragma once

#include <cstddef>
#include <functional>

namespace veil {

// Caps the worker count used by every parallel stage. 0 selects
// std::thread::hardware_concurrency(). Results never depend on this value:
// work is split so each output element is written by exactly one worker and
// reductions combine fixed-size blocks in index order.
void set_thread_count(unsigned count);
unsigned thread_count();

// Calls body(begin, end) over disjoint contiguous sub-ranges of [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

// Sum of term(i) for i in [0, n). Terms are accumulated in blocks of a fixed
// size and the block totals are added in order, so the result is bit-identical
// for any thread count.
double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& term);

// Same reduction policy, for callers that can sum a whole block at once.
double deterministic_block_sum(std::size_t n,
                               const std::function<double(std::size_t, std::size_t)>& block_sum);

}  // namespace veil
