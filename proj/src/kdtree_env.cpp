#include "absim/kdtree_env.hpp"

#include <algorithm>
#include <cmath>

namespace absim {

void KdTreeEnvironment::update() {
  points_.clear();
  nodes_.clear();
  largest_diameter_ = 0.0;
  points_.reserve(rm_.total_agents());
  rm_.for_each_agent([&](Agent& a, AgentHandle h) {
    points_.push_back({a.position(), h});
    largest_diameter_ = std::max(largest_diameter_, a.diameter());
  });
  if (points_.empty()) return;
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::uint32_t KdTreeEnvironment::build(std::uint32_t begin,
                                       std::uint32_t end) {
  const auto node_index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin > kLeafSize) {
    Vec3 lo = points_[begin].pos, hi = points_[begin].pos;
    for (std::uint32_t i = begin + 1; i < end; ++i) {
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], points_[i].pos[k]);
        hi[k] = std::max(hi[k], points_[i].pos[k]);
      }
    }
    int axis = 0;
    double widest = hi[0] - lo[0];
    for (int k = 1; k < 3; ++k) {
      if (hi[k] - lo[k] > widest) {
        widest = hi[k] - lo[k];
        axis = k;
      }
    }
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid,
                     points_.begin() + end,
                     [axis](const Point& a, const Point& b) {
                       return a.pos[axis] < b.pos[axis];
                     });
    node.axis = static_cast<std::uint8_t>(axis);
    node.split = points_[mid].pos[axis];
    node.child = build(begin, mid);
    node.right = build(mid, end);
  }
  nodes_[node_index] = node;
  return node_index;
}

void KdTreeEnvironment::for_each_neighbor(const AgentHandle& query,
                                          const Vec3& center,
                                          double squared_radius,
                                          NeighborVisitor& visitor) {
  if (nodes_.empty()) return;
  const double radius = std::sqrt(squared_radius);
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.child == 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Point& pt = points_[i];
        if (pt.handle == query) continue;
        double d2 = squared_distance(center, pt.pos);
        if (d2 <= squared_radius) {
          visitor.visit(rm_.agent(pt.handle), d2);
        }
      }
      continue;
    }
    const double delta = center[node.axis] - node.split;
    if (delta <= radius) stack[top++] = node.child;
    if (delta >= -radius) stack[top++] = node.right;
  }
}

}  // namespace absim
