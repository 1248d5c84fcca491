#pragma once

#include <cstdint>
#include <functional>

namespace mmn {

// Global worker count for row-parallel loops. 1 (the default) runs inline.
void set_thread_count(int n);
int thread_count();

// Runs fn over contiguous blocks covering [0, n). Each block must write
// disjoint outputs only; results are then independent of scheduling and
// identical at any thread count.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace mmn
