// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace quantsmooth {

// Worker cap: min(hardware threads, QUANTSMOOTH_THREADS if set).
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Work items must be independent; results land in
// caller-owned slots, reductions happen serially afterwards so outputs do not
// depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace quantsmooth
