#include "absim/params.hpp"

#include <stdexcept>

namespace absim {

const char* to_string(EnvironmentKind k) {
  switch (k) {
    case EnvironmentKind::kUniformGrid: return "uniform_grid";
    case EnvironmentKind::kBruteForce: return "brute_force";
    case EnvironmentKind::kKdTree: return "kdtree";
  }
  return "?";
}

const char* to_string(AllocatorKind k) {
  return k == AllocatorKind::kPool ? "pool" : "system";
}

bool parse_environment_kind(const std::string& s, EnvironmentKind& out) {
  if (s == "uniform_grid" || s == "grid") {
    out = EnvironmentKind::kUniformGrid;
  } else if (s == "brute_force" || s == "brute") {
    out = EnvironmentKind::kBruteForce;
  } else if (s == "kdtree" || s == "kd_tree") {
    out = EnvironmentKind::kKdTree;
  } else {
    return false;
  }
  return true;
}

bool parse_allocator_kind(const std::string& s, AllocatorKind& out) {
  if (s == "pool") {
    out = AllocatorKind::kPool;
  } else if (s == "system") {
    out = AllocatorKind::kSystem;
  } else {
    return false;
  }
  return true;
}

void SimulationParams::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(what); };
  if (thread_count < 0) fail("thread_count must be >= 0");
  if (domain_count < 0) fail("domain_count must be >= 0");
  if (thread_count > 0 && domain_count > thread_count) {
    fail("domain_count must not exceed thread_count");
  }
  if (fixed_box_length < 0.0) fail("fixed_box_length must be >= 0");
  if (sorting_frequency > 0 &&
      environment_kind != EnvironmentKind::kUniformGrid) {
    fail("sorting requires the uniform_grid environment");
  }
  if (!(mem_mgr_growth_rate > 1.0)) fail("mem_mgr_growth_rate must be > 1");
  if (mem_mgr_aligned_pages_shift > 12) {
    fail("mem_mgr_aligned_pages_shift must be <= 12");
  }
  if (mem_mgr_migration_threshold == 0) {
    fail("mem_mgr_migration_threshold must be > 0");
  }
  if (!(simulation_time_step > 0.0)) {
    fail("simulation_time_step must be > 0");
  }
  if (repulsion_coefficient < 0.0) {
    fail("repulsion_coefficient must be >= 0");
  }
  if (!(max_displacement > 0.0)) fail("max_displacement must be > 0");
  if (force_threshold < 0.0) fail("force_threshold must be >= 0");
  if (agent_block_size == 0) fail("agent_block_size must be > 0");
}

}  // namespace absim
