#pragma once

#include <functional>

namespace mmreg {

/// Worker count: MMREG_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int workerCount();

/// Runs body(row) for every row in [0, rows). Rows are dealt out in contiguous
/// blocks; each row is processed exactly once, so results written per row do
/// not depend on the worker count.
void parallelRows(int rows, const std::function<void(int)>& body, int workers = workerCount());

} // namespace mmreg
