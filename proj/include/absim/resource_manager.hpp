#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "absim/agent.hpp"
#include "absim/handle.hpp"
#include "absim/memory_resource.hpp"

namespace absim {

// Owns all agents, stored as one dense pointer array per memory domain.
// There are never holes inside a domain array; removals compact. Handles are
// (domain, index) pairs and stay valid until the next removal commit or
// sort, both of which bump the epoch; uids are the stable identity and map
// back to handles through a dense uid table.
class ResourceManager {
 public:
  ResourceManager(MemoryResource& resource, int domain_count);
  ~ResourceManager();

  ResourceManager(const ResourceManager&) = delete;
  ResourceManager& operator=(const ResourceManager&) = delete;

  MemoryResource& resource() { return resource_; }
  int domain_count() const { return static_cast<int>(domains_.size()); }

  std::uint64_t total_agents() const;
  std::uint32_t domain_size(int d) const {
    return static_cast<std::uint32_t>(domains_[d].size());
  }
  std::vector<std::uint32_t> domain_sizes() const;
  // Cumulative agent counts per domain: offsets[d] is the flat index of the
  // first agent on domain d, offsets[domain_count] the total.
  std::vector<std::uint64_t> flat_offsets() const;

  Agent& agent(const AgentHandle& h) { return *domains_[h.domain][h.index]; }
  const Agent& agent(const AgentHandle& h) const {
    return *domains_[h.domain][h.index];
  }

  AgentUid next_uid() {
    return uid_counter_.fetch_add(1, std::memory_order_relaxed);
  }
  AgentUid uid_count() const {
    return uid_counter_.load(std::memory_order_relaxed);
  }

  // Allocates and constructs an agent on the given domain's memory.
  Agent* make_agent(int domain, const Vec3& position, double diameter);
  // Destroys the agent and its behaviors, returning memory to the resource.
  void destroy_agent(Agent* a);
  Behavior* clone_behavior(const Behavior& proto, int domain);
  // Full copy (same uid, state, behaviors) backed by the given domain's
  // memory; used when re-homing agents. The source stays untouched.
  Agent* clone_agent(const Agent& src, int domain);

  // Appends an agent; initialization picks domains round-robin. Rejected
  // while the parallel agent loop runs (structural changes must be staged).
  AgentHandle push_agent(Agent* a);
  AgentHandle push_agent(Agent* a, int domain);

  bool contains_uid(AgentUid uid) const {
    return uid < uid_map_.size() && uid_map_[uid] != kNoHandle;
  }
  AgentHandle handle_of_uid(AgentUid uid) const { return uid_map_[uid]; }

  void for_each_agent(const std::function<void(Agent&, AgentHandle)>& fn);

  std::uint64_t epoch() const { return epoch_; }

  // --- engine internals (commit, sorting, scheduler) ---

  static constexpr AgentHandle kNoHandle{0xffffffffu, 0xffffffffu};
  std::vector<Agent*>& domain_storage(int d) { return domains_[d]; }
  void set_structural_lock(bool locked) {
    structural_lock_.store(locked, std::memory_order_release);
  }
  bool structural_locked() const {
    return structural_lock_.load(std::memory_order_acquire);
  }
  void bump_epoch() { ++epoch_; }
  // Single-threaded; grows the uid table to cover all assigned uids so that
  // parallel phases may write disjoint entries in place.
  void ensure_uid_capacity();
  void set_uid_handle(AgentUid uid, const AgentHandle& h) {
    uid_map_[uid] = h;
  }
  void clear_uid_handle(AgentUid uid) { uid_map_[uid] = kNoHandle; }

 private:
  MemoryResource& resource_;
  std::vector<std::vector<Agent*>> domains_;
  std::vector<AgentHandle> uid_map_;
  std::atomic<AgentUid> uid_counter_{0};
  std::atomic<bool> structural_lock_{false};
  std::uint64_t epoch_ = 0;
  std::uint64_t round_robin_ = 0;
};

}  // namespace absim
