#pragma once

#include <cstdint>
#include <vector>

#include "absim/environment.hpp"

namespace absim {

// Baseline for comparisons: median-split kd-tree over agent centers,
// rebuilt from scratch on every update (single-threaded build), leaf size 16.
class KdTreeEnvironment final : public Environment {
 public:
  static constexpr std::uint32_t kLeafSize = 16;

  explicit KdTreeEnvironment(ResourceManager& rm) : rm_(rm) {}

  void update() override;
  void for_each_neighbor(const AgentHandle& query, const Vec3& center,
                         double squared_radius,
                         NeighborVisitor& visitor) override;
  double largest_agent_diameter() const override { return largest_diameter_; }
  const char* name() const override { return "kdtree"; }

 private:
  struct Node {
    // Leaf iff child == 0; points_[begin, end) belong to it.
    std::uint32_t child = 0;  // left child index
    std::uint32_t right = 0;
    std::uint8_t axis = 0;
    double split = 0.0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };
  struct Point {
    Vec3 pos;
    AgentHandle handle;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);

  ResourceManager& rm_;
  std::vector<Point> points_;
  std::vector<Node> nodes_;
  double largest_diameter_ = 0.0;
};

}  // namespace absim
