#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "absim/worker_pool.hpp"

namespace absim {

// One contiguous chunk of agent indices inside a single memory domain.
struct BlockRef {
  std::uint32_t domain = 0;
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
};

enum class ClaimLevel : std::uint8_t {
  kOwned = 0,        // block from the worker's own static share
  kSameDomain = 1,   // stolen from a sibling of the same domain
  kCrossDomain = 2,  // stolen from another domain
};

// Written exactly once, by the worker whose claim won the block.
struct ClaimRecord {
  std::uint64_t ticket = 0;  // order in which the winning claim was drawn
  std::uint16_t worker = 0;
  ClaimLevel level = ClaimLevel::kOwned;
};

struct StealStats {
  std::uint64_t owned = 0;
  std::uint64_t same_domain = 0;
  std::uint64_t cross_domain = 0;
};

// Visits every index block exactly once using all pool workers. Each domain's
// blocks are statically pre-assigned to that domain's workers in contiguous
// runs; a worker that finishes its share steals, preferring blocks of its own
// domain before touching another domain's. Claims go through a per-block
// atomic ticket CAS, so a block is visited by exactly one worker no matter
// how the scan orders race.
//
// domain_sizes[d] is the number of agents stored on domain d (may be zero).
// The visitor runs concurrently on all workers and must not throw.
// claim_log, when given, is resized to the block count and filled with one
// record per block.
void for_each_block_stealing(
    WorkerPool& pool, const std::vector<std::uint32_t>& domain_sizes,
    std::uint32_t block_size,
    const std::function<void(const BlockRef&, WorkerContext&)>& visit,
    std::vector<ClaimRecord>* claim_log = nullptr,
    StealStats* stats = nullptr);

// Audit helper for claim logs produced above: verifies that every block was
// claimed, and that any cross-domain steal by a worker of domain d was drawn
// after every block of domain d had already been claimed (ticket order).
// Returns an empty string on success, otherwise a description of the first
// violation.
std::string audit_claim_log(const std::vector<ClaimRecord>& log,
                            const std::vector<std::uint32_t>& domain_sizes,
                            std::uint32_t block_size, const Topology& topo);

}  // namespace absim
