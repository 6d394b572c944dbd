#include "absim/simulation.hpp"

#include <algorithm>
#include <chrono>

#include "absim/block_schedule.hpp"
#include "absim/kdtree_env.hpp"
#include "absim/mechanics.hpp"
#include "absim/pool_resource.hpp"
#include "absim/sort_balance.hpp"
#include "absim/uniform_grid.hpp"

namespace absim {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

SimulationParams validated(SimulationParams p) {
  p.validate();
  return p;
}

std::unique_ptr<MemoryResource> make_resource(const SimulationParams& p,
                                              int domain_count) {
  if (p.allocator_kind == AllocatorKind::kPool) {
    PoolConfig cfg;
    cfg.growth_rate = p.mem_mgr_growth_rate;
    cfg.aligned_pages_shift = p.mem_mgr_aligned_pages_shift;
    cfg.migration_threshold_bytes = p.mem_mgr_migration_threshold;
    return std::make_unique<PoolResource>(domain_count, cfg);
  }
  return std::make_unique<SystemResource>();
}

std::unique_ptr<Environment> make_environment(const SimulationParams& p,
                                              ResourceManager& rm,
                                              WorkerPool& pool) {
  switch (p.environment_kind) {
    case EnvironmentKind::kUniformGrid:
      return std::make_unique<UniformGrid>(
          rm, pool, UniformGrid::Config{p.fixed_box_length});
    case EnvironmentKind::kBruteForce:
      return std::make_unique<BruteForceEnvironment>(rm);
    case EnvironmentKind::kKdTree:
      return std::make_unique<KdTreeEnvironment>(rm);
  }
  throw std::invalid_argument("unknown environment kind");
}

}  // namespace

// --- AgentContext -----------------------------------------------------------

bool& AgentContext::neighbor_lock_held() {
  static thread_local bool held = false;
  return held;
}

void AgentContext::remove_self() {
  sim_->commit_buffer().stage_removal(*self_, handle_, slot_);
}

void AgentContext::remove(Agent& neighbor) {
  ResourceManager& rm = sim_->resource_manager();
  sim_->commit_buffer().stage_removal(
      neighbor, rm.handle_of_uid(neighbor.uid()), slot_);
}

Agent& AgentContext::add_daughter(const Vec3& position, double diameter) {
  ResourceManager& rm = sim_->resource_manager();
  const int domain = static_cast<int>(handle_.domain);
  Agent* d = rm.make_agent(domain, position, diameter);
  try {
    for (Behavior* b : self_->behaviors()) {
      if (b->copy_to_daughter()) {
        d->add_behavior(rm.clone_behavior(*b, domain));
      }
    }
  } catch (...) {
    rm.destroy_agent(d);
    throw;
  }
  d->mark_newly_added();
  sim_->commit_buffer().stage_addition(d, domain, slot_);
  return *d;
}

// --- Simulation -------------------------------------------------------------

Simulation::Simulation(SimulationParams params)
    : params_(validated(std::move(params))),
      topology_(detect_topology(params_.thread_count, params_.domain_count)),
      resource_(make_resource(params_, topology_.domain_count())),
      pool_resource_(params_.allocator_kind == AllocatorKind::kPool
                         ? static_cast<PoolResource*>(resource_.get())
                         : nullptr),
      pool_(std::make_unique<WorkerPool>(topology_)),
      rm_(std::make_unique<ResourceManager>(*resource_,
                                            topology_.domain_count())),
      env_(make_environment(params_, *rm_, *pool_)),
      commit_(pool_->worker_count(), topology_.domain_count()) {
  slot_env_ = new_time_slot("environment update");
  slot_sort_ = new_time_slot("sort and balance");
  slot_staticness_ = new_time_slot("static agent detection");
  slot_behaviors_ = new_time_slot("behaviors");
  slot_forces_ = new_time_slot("mechanical forces");
  slot_integrate_ = new_time_slot("integrate displacements");
  slot_commit_ = new_time_slot("commit structural changes");

  behaviors_op_.name = "behaviors";
  behaviors_op_.time_slot = slot_behaviors_;
  behaviors_op_.fn = [](Agent& a, AgentContext& ctx) {
    for (Behavior* b : a.behaviors()) b->run(a, ctx);
  };
  forces_op_.name = "mechanical forces";
  forces_op_.time_slot = slot_forces_;
  forces_op_.fn = [this](Agent& a, AgentContext& ctx) { run_forces(a, ctx); };

  scratch_.resize(pool_->worker_count());
}

Simulation::~Simulation() {
  if (commit_.anything_staged()) commit_.discard(*rm_);
}

Agent& Simulation::add_agent(const Vec3& position, double diameter) {
  const int domain = static_cast<int>(add_rr_++ % topology_.domain_count());
  Agent* a = rm_->make_agent(domain, position, diameter);
  try {
    rm_->push_agent(a, domain);
  } catch (...) {
    rm_->destroy_agent(a);
    throw;
  }
  return *a;
}

std::size_t Simulation::new_time_slot(std::string name) {
  op_names_.push_back(std::move(name));
  op_time_ms_.push_back(0.0);
  return op_names_.size() - 1;
}

void Simulation::add_agent_operation(
    std::string name, std::uint64_t frequency,
    std::function<void(Agent&, AgentContext&)> fn) {
  if (running_) {
    throw std::logic_error("cannot register operations during simulate");
  }
  if (frequency == 0) {
    throw std::invalid_argument("operation frequency must be >= 1");
  }
  AgentOp op;
  op.name = std::move(name);
  op.frequency = frequency;
  op.fn = std::move(fn);
  op.time_slot = new_time_slot(op.name);
  user_agent_ops_.push_back(std::move(op));
}

void Simulation::add_standalone_operation(std::string name, Phase phase,
                                          std::uint64_t frequency,
                                          std::function<void(Simulation&)> fn) {
  if (running_) {
    throw std::logic_error("cannot register operations during simulate");
  }
  if (frequency == 0) {
    throw std::invalid_argument("operation frequency must be >= 1");
  }
  StandaloneOp op;
  op.name = std::move(name);
  op.frequency = frequency;
  op.fn = std::move(fn);
  op.time_slot = new_time_slot(op.name);
  op.category_ms = &report_.agent_ops_ms;
  switch (phase) {
    case Phase::kPre:
      pre_ops_.push_back(std::move(op));
      break;
    case Phase::kMid:
      mid_ops_.push_back(std::move(op));
      break;
    case Phase::kPost:
      post_ops_.push_back(std::move(op));
      break;
  }
}

void Simulation::rethrow_op_failure(const std::string& op_name,
                                    std::exception_ptr error) const {
  const std::string where = "operation '" + op_name + "' failed at iteration " +
                            std::to_string(iteration_);
  try {
    std::rethrow_exception(error);
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": " + e.what());
  } catch (...) {
    throw std::runtime_error(where);
  }
}

void Simulation::run_standalone_phase(std::vector<StandaloneOp>& ops) {
  for (StandaloneOp& op : ops) {
    if (iteration_ % op.frequency != 0) continue;
    const auto t0 = Clock::now();
    try {
      op.fn(*this);
    } catch (...) {
      rethrow_op_failure(op.name, std::current_exception());
    }
    const double ms = ms_since(t0);
    op_time_ms_[op.time_slot] += ms;
    *op.category_ms += ms;
  }
}

void Simulation::simulate(std::uint64_t iterations) {
  if (running_) throw std::logic_error("simulate is not reentrant");
  running_ = true;
  struct Guard {
    bool* flag;
    ~Guard() { *flag = false; }
  } guard{&running_};

  const auto t_total = Clock::now();
  try {
    for (std::uint64_t i = 0; i < iterations; ++i) {
      const auto t_iter = Clock::now();

      {  // environment update, every iteration
        const auto t0 = Clock::now();
        try {
          env_->update();
        } catch (...) {
          rethrow_op_failure("environment update", std::current_exception());
        }
        const double ms = ms_since(t0);
        op_time_ms_[slot_env_] += ms;
        report_.env_update_ms += ms;
      }
      if (params_.sorting_frequency > 0 &&
          iteration_ % params_.sorting_frequency == 0) {
        const auto t0 = Clock::now();
        try {
          run_sort();
        } catch (...) {
          rethrow_op_failure("sort and balance", std::current_exception());
        }
        const double ms = ms_since(t0);
        op_time_ms_[slot_sort_] += ms;
        report_.sorting_ms += ms;
      }
      if (params_.detect_static_agents) {
        const auto t0 = Clock::now();
        try {
          run_staticness_update();
        } catch (...) {
          rethrow_op_failure("static agent detection",
                             std::current_exception());
        }
        const double ms = ms_since(t0);
        op_time_ms_[slot_staticness_] += ms;
        report_.agent_ops_ms += ms;
      }
      run_standalone_phase(pre_ops_);

      run_agent_phase();

      {  // apply deferred translations and growth
        const auto t0 = Clock::now();
        try {
          run_integration();
        } catch (...) {
          rethrow_op_failure("integrate displacements",
                             std::current_exception());
        }
        const double ms = ms_since(t0);
        op_time_ms_[slot_integrate_] += ms;
        report_.agent_ops_ms += ms;
      }
      run_standalone_phase(mid_ops_);

      {  // structural changes staged during the agent loop
        const auto t0 = Clock::now();
        try {
          run_commit();
        } catch (...) {
          rethrow_op_failure("commit structural changes",
                             std::current_exception());
        }
        const double ms = ms_since(t0);
        op_time_ms_[slot_commit_] += ms;
        report_.setup_teardown_ms += ms;
      }
      run_standalone_phase(post_ops_);

      ++iteration_;
      report_.per_iteration_ms.push_back(ms_since(t_iter));
    }
  } catch (...) {
    if (commit_.anything_staged()) commit_.discard(*rm_);
    throw;
  }

  report_.iterations += iterations;
  report_.final_agent_count = rm_->total_agents();
  report_.total_wall_ms += ms_since(t_total);
  if (pool_resource_) {
    report_.allocator_batch_migrations =
        pool_resource_->stats().batch_migrations();
  }
  report_.peak_rss_bytes = std::max(report_.peak_rss_bytes, peak_rss_bytes());
  report_.per_operation_ms.clear();
  for (std::size_t i = 0; i < op_names_.size(); ++i) {
    report_.per_operation_ms.emplace_back(op_names_[i], op_time_ms_[i]);
  }
}

void Simulation::run_sort() {
  // Validated at construction: sorting implies the uniform-grid environment.
  auto* grid = static_cast<UniformGrid*>(env_.get());
  SortOutcome o = sort_and_balance(*rm_, *grid, *pool_,
                                   params_.use_extra_memory_during_sort);
  report_.agents_sorted += o.agents_moved;
  // The reorder invalidated the grid's handles; rebuild before anyone reads.
  env_->update();
}

void Simulation::run_staticness_update() {
  if (iteration_ == 0) {
    // No previous iteration to judge by: everyone participates, and flags
    // left over from initialization are wiped without neighbor marking
    // (initial agents were not "added during the last iteration").
    pool_->run([&](WorkerContext& ctx) {
      auto& st = rm_->domain_storage(ctx.domain);
      const auto c = WorkerPool::even_chunk(
          st.size(), ctx.domain_rank, topology_.domains[ctx.domain].threads);
      for (std::size_t i = c.first; i < c.second; ++i) {
        st[i]->set_static(false);
        st[i]->reset_iteration_flags();
      }
    });
    return;
  }

  const double dmax = env_->largest_agent_diameter();
  pool_->run([&](WorkerContext& ctx) {
    const int dom = ctx.domain;
    auto& st = rm_->domain_storage(dom);
    const auto c = WorkerPool::even_chunk(st.size(), ctx.domain_rank,
                                          topology_.domains[dom].threads);
    // Agents whose last iteration could have changed a neighbor's force mark
    // those neighbors before anyone re-evaluates staticness.
    for (std::size_t i = c.first; i < c.second; ++i) {
      Agent& a = *st[i];
      const bool disturbs =
          a.moved_this_iteration() || a.grew_this_iteration();
      const bool fresh = a.newly_added();
      if (!disturbs && !fresh) continue;
      const double r = 0.5 * (a.diameter() + dmax);
      const AgentHandle h{static_cast<std::uint32_t>(dom),
                          static_cast<std::uint32_t>(i)};
      LambdaVisitor visitor([&](Agent& b, double) {
        if (disturbs) b.flag_neighbor_violation();
        if (fresh) b.flag_new_neighbor();
      });
      env_->for_each_neighbor(h, a.position(), r * r, visitor);
    }
    ctx.barrier();
    for (std::size_t i = c.first; i < c.second; ++i) {
      Agent& a = *st[i];
      const bool can_skip_forces =
          !a.moved_this_iteration() && !a.grew_this_iteration() &&
          !a.self_force_change() && !a.newly_added() &&
          !a.neighbor_violation() && !a.new_neighbor() &&
          a.nonzero_force_partners() <= 1;
      a.set_static(can_skip_forces);
      a.reset_iteration_flags();
    }
  });
}

void Simulation::run_agent_phase() {
  std::vector<const AgentOp*> due;
  due.push_back(&behaviors_op_);
  for (const AgentOp& op : user_agent_ops_) {
    if (iteration_ % op.frequency == 0) due.push_back(&op);
  }
  due.push_back(&forces_op_);

  for (WorkerScratch& s : scratch_) {
    s.op_ms.assign(due.size(), 0.0);
    s.force_evaluations = 0;
    s.force_skips = 0;
    s.error = nullptr;
    s.error_op.clear();
  }

  rm_->set_structural_lock(true);
  struct Unlock {
    ResourceManager* rm;
    ~Unlock() { rm->set_structural_lock(false); }
  } unlock{rm_.get()};

  StealStats stats;
  const auto sizes = rm_->domain_sizes();
  const auto t0 = Clock::now();
  for_each_block_stealing(
      *pool_, sizes, params_.agent_block_size,
      [&](const BlockRef& blk, WorkerContext& wctx) {
        WorkerScratch& sc = scratch_[wctx.worker_id];
        if (sc.error) return;
        auto& storage = rm_->domain_storage(blk.domain);
        AgentContext actx;
        actx.sim_ = this;
        actx.slot_ = wctx.worker_id;
        for (std::size_t oi = 0; oi < due.size(); ++oi) {
          const AgentOp& op = *due[oi];
          const auto t_op = Clock::now();
          for (std::uint32_t i = blk.begin; i < blk.end; ++i) {
            Agent& a = *storage[i];
            actx.self_ = &a;
            actx.handle_ = AgentHandle{blk.domain, i};
            try {
              op.fn(a, actx);
            } catch (...) {
              sc.error = std::current_exception();
              sc.error_op = op.name;
              break;
            }
          }
          sc.op_ms[oi] += ms_since(t_op);
          if (sc.error) return;
        }
      },
      nullptr, &stats);
  report_.agent_ops_ms += ms_since(t0);
  report_.same_domain_steals += stats.same_domain;
  report_.cross_domain_steals += stats.cross_domain;

  // Per-op times inside the loop are summed over workers; divide by the
  // worker count so they stay comparable to the wall-clock categories.
  const double workers = static_cast<double>(pool_->worker_count());
  for (std::size_t oi = 0; oi < due.size(); ++oi) {
    double sum = 0.0;
    for (const WorkerScratch& s : scratch_) sum += s.op_ms[oi];
    op_time_ms_[due[oi]->time_slot] += sum / workers;
  }
  for (const WorkerScratch& s : scratch_) {
    report_.force_evaluations += s.force_evaluations;
    report_.force_skips += s.force_skips;
  }
  for (const WorkerScratch& s : scratch_) {
    if (s.error) rethrow_op_failure(s.error_op, s.error);
  }
}

void Simulation::run_forces(Agent& a, AgentContext& ctx) {
  WorkerScratch& sc = scratch_[ctx.slot_];
  if (params_.detect_static_agents && a.is_static()) {
    ++sc.force_skips;
    return;
  }
  const double r = 0.5 * (a.diameter() + env_->largest_agent_diameter());
  Vec3 total{};
  std::uint32_t contributors = 0;
  std::uint64_t evals = 0;
  LambdaVisitor visitor([&](Agent& b, double) {
    ++evals;
    const Vec3 f = pairwise_repulsion(a, b, params_.repulsion_coefficient);
    if (f.squared_norm() > 0.0) {
      ++contributors;
      total += f;
    }
  });
  env_->for_each_neighbor(ctx.handle_, a.position(), r * r, visitor);
  sc.force_evaluations += evals;
  a.set_last_force(total);
  a.set_nonzero_force_partners(contributors);
  if (total.squared_norm() >
      params_.force_threshold * params_.force_threshold) {
    a.translate(total * params_.simulation_time_step);
  }
}

void Simulation::run_integration() {
  pool_->run([&](WorkerContext& ctx) {
    auto& st = rm_->domain_storage(ctx.domain);
    const auto c = WorkerPool::even_chunk(
        st.size(), ctx.domain_rank, topology_.domains[ctx.domain].threads);
    for (std::size_t i = c.first; i < c.second; ++i) {
      st[i]->apply_pending(params_.max_displacement);
    }
  });
}

void Simulation::run_commit() {
  if (!commit_.anything_staged()) return;
  if (params_.detect_static_agents) mark_new_agent_neighbors();
  const CommitStats cs = commit_.commit(*rm_, *pool_);
  report_.agents_added += cs.added;
  report_.agents_removed += cs.removed;
}

void Simulation::mark_new_agent_neighbors() {
  const double dmax = env_->largest_agent_diameter();
  const double rmax = env_->max_query_radius();
  commit_.for_each_staged_addition([&](Agent& fresh) {
    const double r = 0.5 * (fresh.diameter() + dmax);
    if (r <= rmax) {
      LambdaVisitor visitor([](Agent& b, double) { b.flag_new_neighbor(); });
      env_->for_each_neighbor(ResourceManager::kNoHandle, fresh.position(),
                              r * r, visitor);
    } else {
      // Newborn larger than anything indexed; the environment cannot see
      // that far, so scan everyone.
      const Vec3 center = fresh.position();
      rm_->for_each_agent([&](Agent& b, AgentHandle) {
        if (squared_distance(center, b.position()) <= r * r) {
          b.flag_new_neighbor();
        }
      });
    }
  });
}

}  // namespace absim
