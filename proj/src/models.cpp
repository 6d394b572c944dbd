#include "absim/models.hpp"

#include <cmath>

namespace absim::models {

namespace {

std::uint64_t cube_side(std::uint64_t n) {
  std::uint64_t s = 1;
  while (s * s * s < n) ++s;
  return s;
}

int domain_of(ResourceManager& rm, const Agent& a) {
  return static_cast<int>(rm.handle_of_uid(a.uid()).domain);
}

}  // namespace

void build_proliferation(Simulation& sim, std::uint64_t n,
                         const ProliferationConfig& cfg) {
  ResourceManager& rm = sim.resource_manager();
  const std::uint64_t s = cube_side(n);
  const GrowDivide proto(cfg.growth_rate, cfg.division_threshold,
                         cfg.initial_diameter);
  for (std::uint64_t x = 0; x < s; ++x) {
    for (std::uint64_t y = 0; y < s; ++y) {
      for (std::uint64_t z = 0; z < s; ++z) {
        Agent& a = sim.add_agent({static_cast<double>(x) * cfg.spacing,
                                  static_cast<double>(y) * cfg.spacing,
                                  static_cast<double>(z) * cfg.spacing},
                                 cfg.initial_diameter);
        a.add_behavior(rm.clone_behavior(proto, domain_of(rm, a)));
      }
    }
  }
}

void tune_clustering_params(SimulationParams& p, const ClusteringConfig& cfg) {
  if (p.environment_kind == EnvironmentKind::kUniformGrid &&
      p.fixed_box_length < cfg.attraction_radius) {
    p.fixed_box_length = cfg.attraction_radius;
  }
}

void build_clustering(Simulation& sim, std::uint64_t n,
                      const ClusteringConfig& cfg) {
  ResourceManager& rm = sim.resource_manager();
  const double side = std::cbrt(static_cast<double>(n)) * cfg.density_spacing;
  const Cohere proto(cfg.attraction_radius, cfg.speed);
  for (std::uint64_t i = 0; i < n; ++i) {
    Agent& a = sim.add_agent({}, cfg.cell_diameter);
    // Position drawn from the agent's own stream: independent of insertion
    // order and thread count.
    RandomStream rng(sim.params().seed, a.uid(), a.rng_counter());
    a.set_position(
        {rng.uniform(0.0, side), rng.uniform(0.0, side), rng.uniform(0.0, side)});
    a.set_tag(static_cast<std::uint32_t>(a.uid() % 2));
    a.add_behavior(rm.clone_behavior(proto, domain_of(rm, a)));
  }
}

void build_static_front(Simulation& sim, std::uint64_t n,
                        const StaticFrontConfig& cfg) {
  ResourceManager& rm = sim.resource_manager();
  const std::uint64_t s = cube_side(n);
  const double d = cfg.cell_diameter;
  const Grow proto(cfg.growth_rate, d * cfg.diameter_cap_factor);
  const std::uint64_t mid_y = s / 2;
  for (std::uint64_t x = 0; x < s; ++x) {
    for (std::uint64_t y = 0; y < s; ++y) {
      for (std::uint64_t z = 0; z < s; ++z) {
        // Touching lattice: center distance equals the diameter, so contact
        // forces are exactly zero until something grows.
        Agent& a = sim.add_agent({static_cast<double>(x) * d,
                                  static_cast<double>(y) * d,
                                  static_cast<double>(z) * d},
                                 d);
        if (cfg.growth && x == 0 && y == mid_y) {
          a.add_behavior(rm.clone_behavior(proto, domain_of(rm, a)));
        }
      }
    }
  }
}

}  // namespace absim::models
