#pragma once

#include <cstddef>
#include <functional>

namespace alignmeter {

/// Worker count used by parallel_for. Defaults to the ALIGNMETER_THREADS
/// environment variable, else hardware concurrency.
unsigned thread_count();
void set_thread_count(unsigned n);

/// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; callers
/// must write results by index so output does not depend on the schedule.
/// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace alignmeter
