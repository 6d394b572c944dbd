#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace absim {

// Wall-clock and work counters for one simulate() call (cumulative when
// simulate is called repeatedly on the same Simulation).
//
// Category accounting: environment updates and sorting have their own
// buckets; everything executed per agent (behaviors, custom operations,
// forces, integration, staticness upkeep) counts as agent_ops; commits of
// staged additions/removals count as setup_teardown. Dispatch overhead is
// uncounted, so the categories sum to at most total_wall_ms.
struct SimulationReport {
  std::uint64_t iterations = 0;
  std::uint64_t final_agent_count = 0;

  double total_wall_ms = 0.0;
  double agent_ops_ms = 0.0;
  double env_update_ms = 0.0;
  double sorting_ms = 0.0;
  double setup_teardown_ms = 0.0;
  std::vector<double> per_iteration_ms;
  // One entry per registered operation (built-in and custom), in schedule
  // order: total wall time spent in it.
  std::vector<std::pair<std::string, double>> per_operation_ms;

  std::uint64_t force_evaluations = 0;  // pairwise force computations
  std::uint64_t force_skips = 0;        // agents skipped as static
  std::uint64_t agents_added = 0;
  std::uint64_t agents_removed = 0;
  std::uint64_t agents_sorted = 0;  // cross-domain migrations during sorting
  std::uint64_t same_domain_steals = 0;
  std::uint64_t cross_domain_steals = 0;
  std::uint64_t allocator_batch_migrations = 0;
  std::uint64_t peak_rss_bytes = 0;
};

// High-water-mark resident set size of this process, 0 when unavailable.
std::uint64_t peak_rss_bytes();
// Current resident set size of this process, 0 when unavailable.
std::uint64_t current_rss_bytes();

}  // namespace absim
