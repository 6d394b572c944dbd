#include "absim/resource_manager.hpp"

#include <stdexcept>

namespace absim {

ResourceManager::ResourceManager(MemoryResource& resource, int domain_count)
    : resource_(resource) {
  if (domain_count < 1) throw std::invalid_argument("domain_count < 1");
  domains_.resize(domain_count);
}

ResourceManager::~ResourceManager() {
  for (auto& dom : domains_) {
    for (Agent* a : dom) destroy_agent(a);
  }
}

std::uint64_t ResourceManager::total_agents() const {
  std::uint64_t n = 0;
  for (const auto& dom : domains_) n += dom.size();
  return n;
}

std::vector<std::uint32_t> ResourceManager::domain_sizes() const {
  std::vector<std::uint32_t> sizes;
  sizes.reserve(domains_.size());
  for (const auto& dom : domains_) {
    sizes.push_back(static_cast<std::uint32_t>(dom.size()));
  }
  return sizes;
}

std::vector<std::uint64_t> ResourceManager::flat_offsets() const {
  std::vector<std::uint64_t> offsets(domains_.size() + 1, 0);
  for (std::size_t d = 0; d < domains_.size(); ++d) {
    offsets[d + 1] = offsets[d] + domains_[d].size();
  }
  return offsets;
}

Agent* ResourceManager::make_agent(int domain, const Vec3& position,
                                   double diameter) {
  return resource_.create<Agent>(domain, next_uid(), position, diameter);
}

void ResourceManager::destroy_agent(Agent* a) {
  if (!a) return;
  for (Behavior* b : a->behaviors()) {
    const std::size_t bytes = b->allocation_size();
    b->~Behavior();
    resource_.deallocate(b, bytes);
  }
  a->~Agent();
  resource_.deallocate(a, sizeof(Agent));
}

Behavior* ResourceManager::clone_behavior(const Behavior& proto, int domain) {
  void* mem = resource_.allocate(proto.allocation_size(), domain);
  return proto.clone_into(mem);
}

Agent* ResourceManager::clone_agent(const Agent& src, int domain) {
  Agent* a =
      resource_.create<Agent>(domain, src.uid(), src.position(), src.diameter());
  try {
    a->copy_soft_state(src);
    for (const Behavior* b : src.behaviors()) {
      a->add_behavior(clone_behavior(*b, domain));
    }
  } catch (...) {
    destroy_agent(a);
    throw;
  }
  return a;
}

AgentHandle ResourceManager::push_agent(Agent* a) {
  const int domain = static_cast<int>(round_robin_++ % domains_.size());
  return push_agent(a, domain);
}

AgentHandle ResourceManager::push_agent(Agent* a, int domain) {
  if (structural_locked()) {
    throw std::logic_error(
        "direct structural mutation during the parallel agent loop");
  }
  auto& dom = domains_.at(domain);
  dom.push_back(a);
  AgentHandle h{static_cast<std::uint32_t>(domain),
                static_cast<std::uint32_t>(dom.size() - 1)};
  if (a->uid() >= uid_map_.size()) ensure_uid_capacity();
  uid_map_[a->uid()] = h;
  return h;
}

void ResourceManager::for_each_agent(
    const std::function<void(Agent&, AgentHandle)>& fn) {
  for (std::uint32_t d = 0; d < domains_.size(); ++d) {
    for (std::uint32_t i = 0; i < domains_[d].size(); ++i) {
      fn(*domains_[d][i], AgentHandle{d, i});
    }
  }
}

void ResourceManager::ensure_uid_capacity() {
  const AgentUid n = uid_counter_.load(std::memory_order_relaxed);
  if (uid_map_.size() < n) uid_map_.resize(n, kNoHandle);
}

}  // namespace absim
