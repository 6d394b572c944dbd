#pragma once

#include <cstdint>
#include <span>

#include "absim/worker_pool.hpp"

namespace absim {

// In-place exclusive prefix sum; returns the total. Work-efficient two-pass
// scheme: per-worker chunk sums, a scan over the chunk totals, then a second
// pass rewriting each chunk with its base offset. Small inputs take a serial
// pass, the parallel version is not worth the two barriers below a few
// thousand elements.
std::uint64_t exclusive_prefix_sum(WorkerPool& pool,
                                   std::span<std::uint64_t> values);

std::uint64_t exclusive_prefix_sum_serial(std::span<std::uint64_t> values);

}  // namespace absim
