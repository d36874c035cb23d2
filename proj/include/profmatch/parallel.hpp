#pragma once

#include <cstddef>
#include <functional>

namespace profmatch {

/// Number of hardware threads, at least 1.
std::size_t default_workers();

/// Runs body(i) for i in [0, count) on up to `workers` threads (0 means
/// default_workers()). Items are claimed from a shared counter, so results
/// must be written to per-item slots. If any item throws, the exception of
/// the lowest failing index is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace profmatch
