#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace absim {

enum class EnvironmentKind { kUniformGrid, kBruteForce, kKdTree };
enum class AllocatorKind { kPool, kSystem };

const char* to_string(EnvironmentKind k);
const char* to_string(AllocatorKind k);
bool parse_environment_kind(const std::string& s, EnvironmentKind& out);
bool parse_allocator_kind(const std::string& s, AllocatorKind& out);

struct SimulationParams {
  std::uint64_t seed = 42;

  int thread_count = 0;  // 0 = hardware concurrency
  int domain_count = 0;  // 0 = detect memory domains from the OS

  EnvironmentKind environment_kind = EnvironmentKind::kUniformGrid;
  // 0 = derive the grid box length from the largest agent diameter at every
  // environment update; > 0 pins it (needed when query radii exceed the
  // largest diameter, e.g. attraction radii).
  double fixed_box_length = 0.0;

  // Re-sort agents along the space-filling curve and rebalance domains every
  // this many iterations; 0 = never.
  std::uint64_t sorting_frequency = 0;
  bool use_extra_memory_during_sort = true;

  bool detect_static_agents = false;

  AllocatorKind allocator_kind = AllocatorKind::kPool;
  double mem_mgr_growth_rate = 2.0;
  unsigned mem_mgr_aligned_pages_shift = 5;
  std::size_t mem_mgr_migration_threshold = std::size_t{1} << 20;

  double simulation_time_step = 0.1;
  double repulsion_coefficient = 2.0;
  // Largest displacement an agent may take in one step, in space units.
  double max_displacement = 3.0;
  // Net force magnitude that must be exceeded before an agent moves.
  double force_threshold = 0.0;

  std::uint32_t agent_block_size = 256;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

}  // namespace absim
