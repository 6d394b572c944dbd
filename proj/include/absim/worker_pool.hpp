#pragma once

#include <atomic>
#include <barrier>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "absim/topology.hpp"

namespace absim {

class WorkerPool;

struct WorkerContext {
  WorkerPool* pool = nullptr;
  int worker_id = 0;    // global id, domain-major
  int domain = 0;       // memory domain this worker belongs to
  int domain_rank = 0;  // rank among workers of the same domain

  int worker_count() const;
  // Synchronizes all workers of the pool inside the current region.
  void barrier() const;
};

// Fixed set of threads, one per requested worker, parked between regions.
// A region is one function executed by every worker simultaneously; the
// caller blocks until all workers return. Worker-to-domain assignment is
// fixed at construction from the topology; when the topology carries CPU
// lists and more than one domain, workers are pinned to their domain's CPUs.
//
// Region functions must keep barrier use balanced across workers. Exceptions
// escaping a region function are captured; the first one is rethrown on the
// calling thread after the region completes. Code between barriers must not
// throw, or workers still parked at the barrier would wait forever.
class WorkerPool {
 public:
  explicit WorkerPool(Topology topology);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int worker_count() const { return worker_count_; }
  const Topology& topology() const { return topology_; }

  void run(const std::function<void(WorkerContext&)>& region);

  // Static even split of [0, n) over all workers in one region.
  void parallel_for(
      std::size_t n,
      const std::function<void(std::size_t, std::size_t, WorkerContext&)>& fn);

  // Chunk of a static even split, usable inside a region.
  static std::pair<std::size_t, std::size_t> even_chunk(std::size_t n,
                                                        int part,
                                                        int parts);

  std::barrier<>& region_barrier() { return barrier_; }

 private:
  void worker_main(int id);

  Topology topology_;
  int worker_count_;
  std::barrier<> barrier_;

  std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  const std::function<void(WorkerContext&)>* region_ = nullptr;
  std::uint64_t region_seq_ = 0;
  int done_count_ = 0;
  bool shutdown_ = false;
  std::exception_ptr first_error_;

  std::vector<std::thread> threads_;
};

}  // namespace absim
