#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "absim/resource_manager.hpp"
#include "absim/worker_pool.hpp"

namespace absim {

struct CommitStats {
  std::uint64_t removed = 0;
  std::uint64_t added = 0;
  // Scratch elements allocated by removal commits; stays O(removed + threads).
  std::uint64_t aux_elements = 0;
};

// Removes the slots listed in `removed` (unique, in range) from one domain's
// storage and compacts it without leaving holes, in O(removed) time and
// scratch space independent of the surviving count:
//   1. split point new_size = n - r; two length-r scratch arrays
//   2. each thread marks its share of removals: slots left of the split are
//      holes, slots right of it flag their tail position as removed
//   3. per-thread blocks compact hole indices and surviving tail indices
//      (skipping untouched sentinel entries)
//   4. prefix sums pair the k-th hole with the k-th surviving tail element,
//      then all pairs move in parallel
//   5. the storage shrinks to new_size
// Removed agents are destroyed, survivors' uid entries retargeted. Returns
// the number of scratch elements allocated (for the complexity audit).
std::uint64_t remove_agents_parallel(ResourceManager& rm, int domain,
                                     const std::vector<std::uint32_t>& removed,
                                     WorkerPool& pool);

// Thread-local staging for structural changes made during the parallel agent
// loop. Slot w belongs to worker w; the extra last slot to the control
// thread. commit() applies removals first, then appends additions
// domain-by-domain with disjoint writes.
class CommitBuffer {
 public:
  CommitBuffer(int worker_count, int domain_count);

  // Marks the agent's slot for removal; throws std::logic_error if the agent
  // was already staged (per-agent atomic guard).
  void stage_removal(Agent& a, const AgentHandle& h, int slot);
  // Takes ownership of a fully constructed agent for the given domain.
  void stage_addition(Agent* a, int domain, int slot);

  bool anything_staged() const;
  std::uint64_t staged_removals() const;
  // Visits every staged-but-uncommitted addition (any slot, any domain).
  void for_each_staged_addition(const std::function<void(Agent&)>& fn) const;

  CommitStats commit(ResourceManager& rm, WorkerPool& pool);

  // Drops everything staged: staged additions are destroyed, staged removals
  // un-flagged. Only valid while the staging handles are still current
  // (i.e. before any commit or sort has run since they were staged).
  void discard(ResourceManager& rm);

  int control_slot() const { return static_cast<int>(deltas_.size()) - 1; }

 private:
  struct alignas(64) Delta {
    std::vector<AgentHandle> removals;
    std::vector<std::vector<Agent*>> additions;  // [domain]
  };
  std::vector<Delta> deltas_;
};

}  // namespace absim
