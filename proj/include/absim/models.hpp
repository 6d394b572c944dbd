#pragma once

#include <algorithm>
#include <cstdint>

#include "absim/simulation.hpp"

namespace absim::models {

// --- behaviors --------------------------------------------------------------

// Grows by a fixed diameter increment per iteration; once the division
// threshold is reached, spawns a daughter half a diameter away in a random
// direction and resets to the initial diameter.
class GrowDivide final : public BehaviorBase<GrowDivide> {
 public:
  GrowDivide(double growth_rate, double division_threshold,
             double initial_diameter)
      : growth_rate_(growth_rate),
        division_threshold_(division_threshold),
        initial_diameter_(initial_diameter) {}

  void run(Agent& a, AgentContext& ctx) override {
    if (a.diameter() >= division_threshold_) {
      const Vec3 dir = ctx.random().unit_vector();
      Agent& daughter = ctx.add_daughter(
          a.position() + dir * (0.5 * a.diameter()), initial_diameter_);
      daughter.set_tag(a.tag());
      a.grow(initial_diameter_ - a.diameter());
    } else {
      a.grow(growth_rate_);
    }
  }

 private:
  double growth_rate_;
  double division_threshold_;
  double initial_diameter_;
};

// Moves one fixed-length step per iteration toward the centroid of same-type
// agents within the attraction radius.
class Cohere final : public BehaviorBase<Cohere> {
 public:
  Cohere(double attraction_radius, double speed)
      : attraction_radius_(attraction_radius), speed_(speed) {}

  void run(Agent& a, AgentContext& ctx) override {
    Vec3 sum{};
    std::uint64_t count = 0;
    ctx.for_each_neighbor(attraction_radius_, [&](Agent& b, double) {
      if (b.tag() == a.tag()) {
        sum += b.position();
        ++count;
      }
    });
    if (count == 0) return;
    Vec3 to_centroid = sum * (1.0 / static_cast<double>(count)) - a.position();
    const double dist = to_centroid.norm();
    if (dist > 0.0) a.translate(to_centroid * (speed_ / dist));
  }

 private:
  double attraction_radius_;
  double speed_;
};

// Fixed diameter growth per iteration up to a cap.
class Grow final : public BehaviorBase<Grow> {
 public:
  Grow(double growth_rate, double diameter_cap)
      : growth_rate_(growth_rate), diameter_cap_(diameter_cap) {}

  void run(Agent& a, AgentContext&) override {
    if (a.diameter() < diameter_cap_) {
      a.grow(std::min(growth_rate_, diameter_cap_ - a.diameter()));
    }
  }

 private:
  double growth_rate_;
  double diameter_cap_;
};

// --- benchmark populations --------------------------------------------------

struct ProliferationConfig {
  double spacing = 20.0;
  double initial_diameter = 10.0;
  double growth_rate = 2.0;
  double division_threshold = 14.0;
};

// Cubic lattice of ceil(n^(1/3))^3 growing-and-dividing cells.
void build_proliferation(Simulation& sim, std::uint64_t n,
                         const ProliferationConfig& cfg = {});

struct ClusteringConfig {
  double attraction_radius = 30.0;
  double speed = 1.0;
  double cell_diameter = 10.0;
  // Cube side = cbrt(n) * density_spacing.
  double density_spacing = 20.0;
};

// The attraction radius exceeds any diameter, so a uniform-grid environment
// must pin its box length to it; call before constructing the Simulation.
void tune_clustering_params(SimulationParams& p,
                            const ClusteringConfig& cfg = {});

// n cells of two interleaved types, uniformly random in a cube.
void build_clustering(Simulation& sim, std::uint64_t n,
                      const ClusteringConfig& cfg = {});

struct StaticFrontConfig {
  double cell_diameter = 10.0;
  bool growth = true;
  double growth_rate = 0.5;
  double diameter_cap_factor = 2.0;
};

// Settled cubic slab (touching lattice, zero net forces) of ceil(n^(1/3))^3
// cells with one growing column on the x = 0 face; the bulk should be
// detected as static while only the front stays active.
void build_static_front(Simulation& sim, std::uint64_t n,
                        const StaticFrontConfig& cfg = {});

}  // namespace absim::models
