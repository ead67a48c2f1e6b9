#pragma once

#include <functional>

namespace panoscene {

/// Global worker count used by the row-parallel loops. Defaults to 1.
/// Results are independent of this value: every parallel loop in the library
/// writes to disjoint output slots and performs no cross-row reductions.
void set_thread_count(int threads);
int thread_count();

/// Runs fn(row) for row in [begin, end), statically partitioned across the
/// configured worker count.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

}  // namespace panoscene
