#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>

#include "absim/environment.hpp"
#include "absim/worker_pool.hpp"

namespace absim {

// Uniform grid of cubic boxes over the agents' bounding volume. Agents of a
// box form an array-based linked list: the box holds the head handle, and a
// per-domain successor array holds, for each agent slot, the next handle in
// its box's chain. Boxes carry a timestamp instead of being cleared: a box
// whose stamp differs from the grid's current stamp is empty. Updates
// therefore cost O(#agents) regardless of how many boxes exist, and the box
// array itself is reused (it only ever grows).
//
// Insertion is concurrent: a worker exchanges the box head with its agent's
// packed handle and chains the previous head into the successor array; a
// stale box is reset by whichever worker reaches it first (sentinel CAS on
// the stamp, losers spin until the winner publishes the current stamp).
class UniformGrid final : public Environment {
 public:
  struct Config {
    // 0 = box edge follows the largest agent diameter per update.
    double fixed_box_length = 0.0;
  };

  UniformGrid(ResourceManager& rm, WorkerPool& pool);
  UniformGrid(ResourceManager& rm, WorkerPool& pool, Config cfg);

  void update() override;
  void for_each_neighbor(const AgentHandle& query, const Vec3& center,
                         double squared_radius,
                         NeighborVisitor& visitor) override;
  double largest_agent_diameter() const override { return largest_diameter_; }
  double max_query_radius() const override { return box_length_; }
  const char* name() const override { return "uniform_grid"; }

  double box_length() const { return box_length_; }
  const Vec3& origin() const { return origin_; }
  const std::array<std::uint32_t, 3>& dims() const { return dims_; }
  std::uint64_t box_count() const {
    return std::uint64_t{dims_[0]} * dims_[1] * dims_[2];
  }
  std::uint64_t total_agents_indexed() const { return indexed_agents_; }

  std::uint64_t box_index_of(const Vec3& p) const;
  std::array<std::uint32_t, 3> box_coords_of(std::uint64_t box) const {
    return {static_cast<std::uint32_t>(box % dims_[0]),
            static_cast<std::uint32_t>(box / dims_[0] % dims_[1]),
            static_cast<std::uint32_t>(box / (std::uint64_t{dims_[0]} * dims_[1]))};
  }

  std::uint32_t box_agent_count(std::uint64_t box) const;
  void for_each_agent_in_box(
      std::uint64_t box, const std::function<void(AgentHandle)>& fn) const;

 private:
  struct Box {
    std::atomic<std::uint64_t> stamp{0};
    std::atomic<std::uint64_t> head{kNil};
    std::atomic<std::uint32_t> count{0};
  };

  static constexpr std::uint64_t kNil = ~std::uint64_t{0};
  static constexpr std::uint64_t kResetting = ~std::uint64_t{0};

  // Makes a stale box current (empty) exactly once per update.
  void refresh_box(Box& b);
  std::uint64_t chase(std::uint64_t packed) const {
    AgentHandle h = AgentHandle::unpack(packed);
    return successors_[h.domain][h.index];
  }

  ResourceManager& rm_;
  WorkerPool& pool_;
  Config cfg_;

  double box_length_ = 0.0;
  double largest_diameter_ = 0.0;
  Vec3 origin_;
  std::array<std::uint32_t, 3> dims_{1, 1, 1};
  std::uint64_t stamp_ = 0;
  std::uint64_t indexed_agents_ = 0;

  std::unique_ptr<Box[]> boxes_;
  std::uint64_t box_capacity_ = 0;
  std::vector<std::vector<std::uint64_t>> successors_;
};

}  // namespace absim
