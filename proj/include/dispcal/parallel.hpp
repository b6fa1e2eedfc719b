#pragma once

#include <cstddef>
#include <functional>

namespace dispcal {

/// Runs fn(i) for i in [begin, end) on a small pool of std::threads.
/// Calls made from inside a worker run serially, so nesting never oversubscribes.
/// Each index is processed exactly once; results must not depend on scheduling.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn);

/// Worker count used by parallel_for (hardware concurrency, at least 1).
unsigned worker_count() noexcept;

}  // namespace dispcal
