#pragma once

#include <cstddef>
#include <functional>

namespace nof1 {

// Process-wide worker count used by parallel_for. 0 selects
// std::thread::hardware_concurrency().
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs body(i) for i in [0, n). Work items must write only to their own
// output slots; results are then identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace nof1
