#pragma once

#include <limits>
#include <utility>

#include "absim/handle.hpp"
#include "absim/resource_manager.hpp"
#include "absim/vec3.hpp"

namespace absim {

class NeighborVisitor {
 public:
  virtual ~NeighborVisitor() = default;
  virtual void visit(Agent& neighbor, double squared_distance) = 0;
};

// Stack adapter so call sites can pass a lambda without heap allocation.
template <class F>
class LambdaVisitor final : public NeighborVisitor {
 public:
  explicit LambdaVisitor(F fn) : fn_(std::forward<F>(fn)) {}
  void visit(Agent& neighbor, double squared_distance) override {
    fn_(neighbor, squared_distance);
  }

 private:
  F fn_;
};

// Fixed-radius neighbor index over the current agent positions. update()
// captures a snapshot; queries then return exactly the agents (excluding the
// query agent) whose center distance to the query center is <= radius. Any
// structural change or movement invalidates the snapshot until the next
// update.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual void update() = 0;
  virtual void for_each_neighbor(const AgentHandle& query, const Vec3& center,
                                 double squared_radius,
                                 NeighborVisitor& visitor) = 0;
  virtual double largest_agent_diameter() const = 0;
  // Largest radius a query may use; unbounded except for the uniform grid,
  // which cannot see past the 3x3x3 box neighborhood.
  virtual double max_query_radius() const {
    return std::numeric_limits<double>::infinity();
  }
  virtual const char* name() const = 0;
};

class BruteForceEnvironment final : public Environment {
 public:
  explicit BruteForceEnvironment(ResourceManager& rm) : rm_(rm) {}

  void update() override {
    largest_diameter_ = 0.0;
    rm_.for_each_agent([&](Agent& a, AgentHandle) {
      largest_diameter_ = std::max(largest_diameter_, a.diameter());
    });
  }

  void for_each_neighbor(const AgentHandle& query, const Vec3& center,
                         double squared_radius,
                         NeighborVisitor& visitor) override {
    rm_.for_each_agent([&](Agent& a, AgentHandle h) {
      if (h == query) return;
      double d2 = squared_distance(center, a.position());
      if (d2 <= squared_radius) visitor.visit(a, d2);
    });
  }

  double largest_agent_diameter() const override { return largest_diameter_; }
  const char* name() const override { return "brute_force"; }

 private:
  ResourceManager& rm_;
  double largest_diameter_ = 0.0;
};

}  // namespace absim
