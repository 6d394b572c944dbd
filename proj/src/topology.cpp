#include "absim/topology.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace absim {

int Topology::total_threads() const {
  int n = 0;
  for (const auto& d : domains) n += d.threads;
  return n;
}

int Topology::worker_domain(int worker_id) const {
  int acc = 0;
  for (int d = 0; d < domain_count(); ++d) {
    acc += domains[d].threads;
    if (worker_id < acc) return d;
  }
  return domain_count() - 1;
}

std::string Topology::describe() const {
  std::ostringstream os;
  switch (source) {
    case TopologySource::kDetected: os << "detected"; break;
    case TopologySource::kLogical: os << "logical"; break;
    case TopologySource::kSingleDomain: os << "single"; break;
  }
  os << ", " << domain_count() << " domain(s):";
  for (const auto& d : domains) os << " " << d.threads;
  return os.str();
}

namespace {

// Parses a sysfs cpulist such as "0-3,8,10-11".
std::vector<int> parse_cpulist(const std::string& text) {
  std::vector<int> cpus;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    auto dash = part.find('-');
    if (dash == std::string::npos) {
      cpus.push_back(std::stoi(part));
    } else {
      int lo = std::stoi(part.substr(0, dash));
      int hi = std::stoi(part.substr(dash + 1));
      for (int c = lo; c <= hi; ++c) cpus.push_back(c);
    }
  }
  return cpus;
}

std::vector<std::vector<int>> read_numa_nodes() {
  std::vector<std::vector<int>> nodes;
  namespace fs = std::filesystem;
  const fs::path base{"/sys/devices/system/node"};
  std::error_code ec;
  if (!fs::exists(base, ec)) return nodes;
  std::vector<fs::path> node_dirs;
  for (const auto& entry : fs::directory_iterator(base, ec)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("node", 0) == 0 &&
        name.find_first_not_of("0123456789", 4) == std::string::npos) {
      node_dirs.push_back(entry.path());
    }
  }
  std::sort(node_dirs.begin(), node_dirs.end());
  for (const auto& dir : node_dirs) {
    std::ifstream in(dir / "cpulist");
    std::string line;
    if (in && std::getline(in, line)) {
      auto cpus = parse_cpulist(line);
      if (!cpus.empty()) nodes.push_back(std::move(cpus));
    }
  }
  return nodes;
}

void spread_evenly(Topology& topo, int thread_count) {
  const int nd = topo.domain_count();
  for (int d = 0; d < nd; ++d) {
    topo.domains[d].threads = thread_count / nd + (d < thread_count % nd);
  }
}

}  // namespace

Topology detect_topology(int thread_count, int domain_override) {
  if (thread_count == 0) {
    thread_count = static_cast<int>(std::thread::hardware_concurrency());
    if (thread_count <= 0) thread_count = 1;
  }
  if (thread_count < 0) throw std::invalid_argument("thread count must be positive");

  Topology topo;
  if (domain_override > 0) {
    if (domain_override > thread_count) {
      throw std::invalid_argument(
          "domain count must not exceed thread count");
    }
    topo.source = TopologySource::kLogical;
    topo.domains.resize(domain_override);
    spread_evenly(topo, thread_count);
    return topo;
  }

  auto nodes = read_numa_nodes();
  if (nodes.size() > 1 && static_cast<int>(nodes.size()) <= thread_count) {
    topo.source = TopologySource::kDetected;
    int total_cpus = 0;
    for (const auto& n : nodes) total_cpus += static_cast<int>(n.size());
    int assigned = 0;
    for (const auto& n : nodes) {
      MemoryDomain d;
      d.cpus = n;
      d.threads = std::max(
          1, static_cast<int>(n.size()) * thread_count / total_cpus);
      assigned += d.threads;
      topo.domains.push_back(std::move(d));
    }
    // Fix up rounding so the total matches the request exactly.
    int d = 0;
    while (assigned < thread_count) {
      ++topo.domains[d % topo.domain_count()].threads;
      ++assigned;
      ++d;
    }
    d = 0;
    while (assigned > thread_count) {
      auto& t = topo.domains[d % topo.domain_count()].threads;
      if (t > 1) {
        --t;
        --assigned;
      }
      ++d;
    }
    return topo;
  }

  topo.source = TopologySource::kSingleDomain;
  topo.domains.resize(1);
  topo.domains[0].threads = thread_count;
  if (!nodes.empty()) topo.domains[0].cpus = nodes[0];
  return topo;
}

}  // namespace absim
