#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "absim/commit.hpp"
#include "absim/environment.hpp"
#include "absim/memory_resource.hpp"
#include "absim/params.hpp"
#include "absim/random.hpp"
#include "absim/report.hpp"
#include "absim/resource_manager.hpp"
#include "absim/worker_pool.hpp"

namespace absim {

class Simulation;
class PoolResource;

// Handed to behaviors and agent operations for everything beyond mutating
// the executing agent itself: neighbor queries, per-agent randomness,
// staged structural changes (applied at the end of the iteration), and
// guarded writes to neighbors.
class AgentContext {
 public:
  Agent& self() { return *self_; }
  const AgentHandle& handle() const { return handle_; }
  Simulation& simulation() { return *sim_; }
  const SimulationParams& params() const;
  std::uint64_t iteration() const;

  // Draws are a pure function of (seed, agent uid, per-agent counter), so
  // sequences do not depend on thread count or scheduling order.
  RandomStream random();

  // Visits agents within `radius` of this agent (center distance, inclusive),
  // excluding the agent itself. fn receives the neighbor and the squared
  // center distance.
  template <class F>
  void for_each_neighbor(double radius, F&& fn);

  // Structural changes take effect when the iteration's commit runs.
  void remove_self();
  void remove(Agent& neighbor);
  // Creates an agent on this agent's memory domain, copying the behaviors
  // flagged copy_to_daughter. The returned reference is valid for further
  // setup until the commit.
  Agent& add_daughter(const Vec3& position, double diameter);

  // Runs fn while holding the neighbor's mutation lock. Holding two locks
  // at once would allow deadlock, so nesting throws std::logic_error.
  template <class F>
  void with_neighbor_locked(Agent& neighbor, F&& fn);

 private:
  friend class Simulation;

  Environment& env();
  static bool& neighbor_lock_held();

  Simulation* sim_ = nullptr;
  Agent* self_ = nullptr;
  AgentHandle handle_{};
  int slot_ = 0;  // commit-buffer slot of the executing worker
};

enum class Phase { kPre, kMid, kPost };

// Owns the full engine stack (memory resource, agent storage, worker pool,
// neighbor-search environment) and runs the iteration schedule:
//
//   per iteration: pre standalone operations (environment update, periodic
//   sort/balance, staticness upkeep, then user pre ops) -> parallel loop
//   applying every due agent operation block by block (behaviors, user agent
//   ops, mechanical forces; blocks are claimed with work stealing) -> mid
//   standalone operations (displacement integration, then user mid ops) ->
//   post standalone operations (commit of staged changes, then user post
//   ops). Standalone operations run on the calling thread with the worker
//   pool quiescent between parallel regions, which provides the barriers.
//
// An operation with frequency f runs on iterations where the global
// iteration counter (starting at 0, cumulative across simulate calls) is
// divisible by f.
class Simulation {
 public:
  explicit Simulation(SimulationParams params);
  ~Simulation();

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const SimulationParams& params() const { return params_; }
  ResourceManager& resource_manager() { return *rm_; }
  Environment& environment() { return *env_; }
  WorkerPool& worker_pool() { return *pool_; }
  const Topology& topology() const { return topology_; }
  CommitBuffer& commit_buffer() { return commit_; }
  std::uint64_t iteration() const { return iteration_; }

  // Creates an agent and registers it immediately (domains round-robin).
  // Initialization path; rejected while the agent loop runs.
  Agent& add_agent(const Vec3& position, double diameter);

  // Registration order is execution order within the slot the operation
  // lands in. frequency must be >= 1. Not callable during simulate().
  void add_agent_operation(std::string name, std::uint64_t frequency,
                           std::function<void(Agent&, AgentContext&)> fn);
  void add_standalone_operation(std::string name, Phase phase,
                                std::uint64_t frequency,
                                std::function<void(Simulation&)> fn);

  // Runs the schedule. May be called repeatedly; the iteration counter and
  // the report accumulate. Failures inside operations are rethrown with the
  // iteration number and operation name attached; staged structural changes
  // of the broken iteration are discarded.
  void simulate(std::uint64_t iterations);

  const SimulationReport& report() const { return report_; }

 private:
  friend class AgentContext;

  struct AgentOp {
    std::string name;
    std::uint64_t frequency = 1;
    std::function<void(Agent&, AgentContext&)> fn;
    std::size_t time_slot = 0;
  };
  struct StandaloneOp {
    std::string name;
    std::uint64_t frequency = 1;
    std::function<void(Simulation&)> fn;
    std::size_t time_slot = 0;
    double* category_ms = nullptr;
  };

  struct alignas(64) WorkerScratch {
    std::vector<double> op_ms;
    std::uint64_t force_evaluations = 0;
    std::uint64_t force_skips = 0;
    std::exception_ptr error;
    std::string error_op;
  };

  std::size_t new_time_slot(std::string name);
  void run_standalone_phase(std::vector<StandaloneOp>& ops);
  void run_agent_phase();
  void run_sort();
  void run_staticness_update();
  void run_integration();
  void run_commit();
  void run_forces(Agent& a, AgentContext& ctx);
  void mark_new_agent_neighbors();
  [[noreturn]] void rethrow_op_failure(const std::string& op_name,
                                       std::exception_ptr error) const;

  SimulationParams params_;
  Topology topology_;
  std::unique_ptr<MemoryResource> resource_;
  PoolResource* pool_resource_ = nullptr;  // non-null iff pooled allocator
  std::unique_ptr<WorkerPool> pool_;
  std::unique_ptr<ResourceManager> rm_;  // destroyed before resource_
  std::unique_ptr<Environment> env_;
  CommitBuffer commit_;

  AgentOp behaviors_op_;
  AgentOp forces_op_;
  std::vector<AgentOp> user_agent_ops_;
  std::vector<StandaloneOp> pre_ops_;   // user pre ops
  std::vector<StandaloneOp> mid_ops_;   // user mid ops
  std::vector<StandaloneOp> post_ops_;  // user post ops

  std::vector<std::string> op_names_;
  std::vector<double> op_time_ms_;
  std::size_t slot_behaviors_ = 0;
  std::size_t slot_forces_ = 0;
  std::size_t slot_env_ = 0;
  std::size_t slot_sort_ = 0;
  std::size_t slot_staticness_ = 0;
  std::size_t slot_integrate_ = 0;
  std::size_t slot_commit_ = 0;

  std::vector<WorkerScratch> scratch_;

  std::uint64_t iteration_ = 0;
  std::uint64_t add_rr_ = 0;  // round-robin domain for add_agent
  bool running_ = false;
  SimulationReport report_;
};

// --- AgentContext inline/template definitions ------------------------------

inline const SimulationParams& AgentContext::params() const {
  return sim_->params();
}

inline std::uint64_t AgentContext::iteration() const {
  return sim_->iteration();
}

inline Environment& AgentContext::env() { return sim_->environment(); }

inline RandomStream AgentContext::random() {
  return RandomStream(sim_->params().seed, self_->uid(),
                      self_->rng_counter());
}

template <class F>
void AgentContext::for_each_neighbor(double radius, F&& fn) {
  LambdaVisitor<F&> visitor(fn);
  env().for_each_neighbor(handle_, self_->position(), radius * radius,
                          visitor);
}

template <class F>
void AgentContext::with_neighbor_locked(Agent& neighbor, F&& fn) {
  bool& held = neighbor_lock_held();
  if (held) throw std::logic_error("nested neighbor locks are not allowed");
  held = true;
  neighbor.mutation_lock().lock();
  struct Release {
    Agent* n;
    bool* held;
    ~Release() {
      n->mutation_lock().unlock();
      *held = false;
    }
  } release{&neighbor, &held};
  fn(neighbor);
}

}  // namespace absim
