#pragma once

#include <cstdint>
#include <vector>

#include "absim/resource_manager.hpp"
#include "absim/uniform_grid.hpp"
#include "absim/worker_pool.hpp"

namespace absim {

struct SortOutcome {
  std::uint64_t agents_moved = 0;
  std::uint64_t boxes = 0;
  // Agent-count share each domain received, box-aligned.
  std::vector<std::uint64_t> domain_share;
};

// Reorders all agents into space-filling-curve order over the grid boxes and
// rebalances them across memory domains proportionally to each domain's
// thread count, without ever splitting one box across domains. Every agent
// is copied into fresh memory on its target domain (and its behaviors with
// it). With use_extra_memory the old copies are freed only after the whole
// pass, trading peak memory for allocator layout; otherwise each old copy is
// freed as soon as it was migrated.
//
// Requires a grid that was updated for the current agent configuration.
// Invalidates handles (epoch bump) and the grid itself; the caller must
// update the environment afterwards.
SortOutcome sort_and_balance(ResourceManager& rm, UniformGrid& grid,
                             WorkerPool& pool, bool use_extra_memory);

}  // namespace absim
