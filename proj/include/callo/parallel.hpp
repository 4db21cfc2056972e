#ifndef CALLO_PARALLEL_HPP
#define CALLO_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace callo {

// Global cap on worker threads. 0 = hardware concurrency, 1 = fully serial
// (the bit-reproducibility reference mode).
void set_num_threads(int n);
int num_threads();

// Splits [0,n) into contiguous ranges and runs fn(begin,end) on worker
// threads. Partitioning never changes the per-element evaluation order inside
// fn, so kernels that write disjoint output ranges produce bitwise identical
// results for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace callo

#endif // CALLO_PARALLEL_HPP
