#pragma once

#include <cstddef>
#include <functional>

namespace qsme {

/// Worker cap: min(hardware_concurrency, QSME_THREADS if set). At least 1.
std::size_t max_threads();

/// Runs fn(i) for i in [0, n). Work is split into fixed-size chunks handed to
/// a small thread pool; chunking does not depend on the thread count, so any
/// chunk-ordered reduction done by the caller is deterministic. fn must be
/// safe to call concurrently for distinct i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace qsme
