#include "absim/worker_pool.hpp"

#include <pthread.h>
#include <sched.h>

namespace absim {

int WorkerContext::worker_count() const { return pool->worker_count(); }

void WorkerContext::barrier() const { pool->region_barrier().arrive_and_wait(); }

WorkerPool::WorkerPool(Topology topology)
    : topology_(std::move(topology)),
      worker_count_(topology_.total_threads()),
      barrier_(worker_count_) {
  threads_.reserve(worker_count_);
  for (int i = 0; i < worker_count_; ++i) {
    threads_.emplace_back([this, i] { worker_main(i); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lk(mutex_);
    shutdown_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::worker_main(int id) {
  WorkerContext ctx;
  ctx.pool = this;
  ctx.worker_id = id;
  ctx.domain = topology_.worker_domain(id);
  ctx.domain_rank = id;
  for (int d = 0; d < ctx.domain; ++d) {
    ctx.domain_rank -= topology_.domains[d].threads;
  }

  if (topology_.source == TopologySource::kDetected &&
      topology_.domain_count() > 1 &&
      !topology_.domains[ctx.domain].cpus.empty()) {
    cpu_set_t set;
    CPU_ZERO(&set);
    for (int cpu : topology_.domains[ctx.domain].cpus) CPU_SET(cpu, &set);
    pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
  }

  std::uint64_t seen = 0;
  for (;;) {
    const std::function<void(WorkerContext&)>* region;
    {
      std::unique_lock lk(mutex_);
      work_cv_.wait(lk, [&] { return shutdown_ || region_seq_ != seen; });
      if (shutdown_) return;
      seen = region_seq_;
      region = region_;
    }
    try {
      (*region)(ctx);
    } catch (...) {
      std::lock_guard lk(mutex_);
      if (!first_error_) first_error_ = std::current_exception();
    }
    {
      std::lock_guard lk(mutex_);
      if (++done_count_ == worker_count_) done_cv_.notify_all();
    }
  }
}

void WorkerPool::run(const std::function<void(WorkerContext&)>& region) {
  std::unique_lock lk(mutex_);
  region_ = &region;
  done_count_ = 0;
  first_error_ = nullptr;
  ++region_seq_;
  work_cv_.notify_all();
  done_cv_.wait(lk, [&] { return done_count_ == worker_count_; });
  region_ = nullptr;
  if (first_error_) {
    auto err = first_error_;
    first_error_ = nullptr;
    lk.unlock();
    std::rethrow_exception(err);
  }
}

std::pair<std::size_t, std::size_t> WorkerPool::even_chunk(std::size_t n,
                                                           int part,
                                                           int parts) {
  std::size_t lo = n * static_cast<std::size_t>(part) / parts;
  std::size_t hi = n * (static_cast<std::size_t>(part) + 1) / parts;
  return {lo, hi};
}

void WorkerPool::parallel_for(
    std::size_t n,
    const std::function<void(std::size_t, std::size_t, WorkerContext&)>& fn) {
  run([&](WorkerContext& ctx) {
    auto [lo, hi] = even_chunk(n, ctx.worker_id, worker_count_);
    fn(lo, hi, ctx);
  });
}

}  // namespace absim
