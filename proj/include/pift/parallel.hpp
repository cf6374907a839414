#pragma once

#include <cstddef>
#include <functional>

namespace pift {

// Worker count for parallel_for. 0 restores the default (PIFT_THREADS, else hardware).
void set_thread_count(int n);
int thread_count();

// Runs body(begin, end) over contiguous chunks of [0, n). Chunking depends only on n and the
// thread count; bodies write to disjoint slots so results never depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

// Pairwise summation in a fixed tree order.
double pairwise_sum(const double* x, std::size_t n);

}  // namespace pift
