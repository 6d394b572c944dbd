#pragma once

#include <string>
#include <vector>

namespace absim {

enum class TopologySource {
  kDetected,       // memory domains read from the OS
  kLogical,        // domain count forced by configuration
  kSingleDomain,   // no topology information available
};

struct MemoryDomain {
  int threads = 0;
  std::vector<int> cpus;  // empty for logical domains
};

// Thread-to-domain layout used by the worker pool. Agents and their working
// memory are kept on the domain of the thread that owns them.
struct Topology {
  std::vector<MemoryDomain> domains;
  TopologySource source = TopologySource::kSingleDomain;

  int domain_count() const { return static_cast<int>(domains.size()); }
  int total_threads() const;
  // Domain of a worker, workers numbered domain-major.
  int worker_domain(int worker_id) const;
  std::string describe() const;
};

// thread_count == 0 picks the hardware concurrency. domain_override == 0
// detects memory domains from the OS and falls back to a single domain;
// a positive value forces that many logical domains (threads spread evenly,
// requires domain_override <= thread_count).
Topology detect_topology(int thread_count = 0, int domain_override = 0);

}  // namespace absim
