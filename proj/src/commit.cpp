#include "absim/commit.hpp"

#include <limits>
#include <stdexcept>

#include "absim/prefix_sum.hpp"

namespace absim {

namespace {
constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();
}

std::uint64_t remove_agents_parallel(ResourceManager& rm, int domain,
                                     const std::vector<std::uint32_t>& removed,
                                     WorkerPool& pool) {
  auto& storage = rm.domain_storage(domain);
  const std::uint32_t n = static_cast<std::uint32_t>(storage.size());
  const std::uint32_t r = static_cast<std::uint32_t>(removed.size());
  if (r == 0) return 0;
  if (r > n) throw std::invalid_argument("more removals than agents");
  const std::uint32_t new_size = n - r;
  const int workers = pool.worker_count();

  // Step 1: scratch sized by the removal count only.
  std::vector<std::uint32_t> to_right(r, kUnset);
  std::vector<std::uint32_t> tail_removed(r, 0);
  std::vector<Agent*> removed_agents(r, nullptr);
  std::vector<std::uint64_t> hole_counts(workers + 1, 0);
  std::vector<std::uint64_t> mover_counts(workers + 1, 0);
  std::uint64_t aux = 3ull * r + 2ull * (workers + 1);

  // Step 2: mark. Writes are disjoint: slot k of to_right belongs to the
  // thread owning removed[k]; tail flags are unique because indices are.
  pool.run([&](WorkerContext& ctx) {
    auto [lo, hi] = WorkerPool::even_chunk(r, ctx.worker_id, workers);
    for (std::size_t k = lo; k < hi; ++k) {
      const std::uint32_t idx = removed[k];
      removed_agents[k] = storage[idx];
      if (idx < new_size) {
        to_right[k] = idx;
      } else {
        tail_removed[idx - new_size] = 1;
      }
    }
  });

  // Step 3: per-thread block compaction. to_right keeps hole indices
  // (skipping untouched entries); tail_removed becomes the list of tail
  // indices that survive and must move left.
  pool.run([&](WorkerContext& ctx) {
    auto [lo, hi] = WorkerPool::even_chunk(r, ctx.worker_id, workers);
    std::size_t holes = lo;
    std::size_t movers = lo;
    for (std::size_t k = lo; k < hi; ++k) {
      if (to_right[k] != kUnset) to_right[holes++] = to_right[k];
      if (tail_removed[k] == 0) {
        tail_removed[movers++] = static_cast<std::uint32_t>(k) + new_size;
      }
    }
    hole_counts[ctx.worker_id] = holes - lo;
    mover_counts[ctx.worker_id] = movers - lo;
  });

  // Step 4: pair the k-th hole with the k-th surviving tail element.
  const std::uint64_t total_holes =
      exclusive_prefix_sum_serial({hole_counts.data(), hole_counts.size()});
  const std::uint64_t total_movers =
      exclusive_prefix_sum_serial({mover_counts.data(), mover_counts.size()});
  if (total_holes != total_movers) {
    throw std::logic_error("removal bookkeeping out of balance");
  }
  std::vector<std::uint32_t> holes(total_holes);
  std::vector<std::uint32_t> movers(total_movers);
  aux += 2 * total_holes;
  pool.run([&](WorkerContext& ctx) {
    const int w = ctx.worker_id;
    auto [lo, hi] = WorkerPool::even_chunk(r, w, workers);
    for (std::uint64_t k = 0; k < hole_counts[w + 1] - hole_counts[w]; ++k) {
      holes[hole_counts[w] + k] = to_right[lo + k];
    }
    for (std::uint64_t k = 0; k < mover_counts[w + 1] - mover_counts[w]; ++k) {
      movers[mover_counts[w] + k] = tail_removed[lo + k];
    }
    ctx.barrier();
    auto [plo, phi] = WorkerPool::even_chunk(total_holes, w, workers);
    for (std::size_t k = plo; k < phi; ++k) {
      Agent* survivor = storage[movers[k]];
      storage[holes[k]] = survivor;
      rm.set_uid_handle(survivor->uid(),
                        {static_cast<std::uint32_t>(domain), holes[k]});
    }
  });

  // Step 5: shrink, then release the removed agents.
  storage.resize(new_size);
  pool.run([&](WorkerContext& ctx) {
    auto [lo, hi] = WorkerPool::even_chunk(r, ctx.worker_id, workers);
    for (std::size_t k = lo; k < hi; ++k) {
      Agent* a = removed_agents[k];
      rm.clear_uid_handle(a->uid());
      rm.destroy_agent(a);
    }
  });
  return aux;
}

CommitBuffer::CommitBuffer(int worker_count, int domain_count) {
  deltas_.resize(worker_count + 1);
  for (auto& d : deltas_) {
    d.additions.resize(domain_count);
  }
}

void CommitBuffer::stage_removal(Agent& a, const AgentHandle& h, int slot) {
  if (!a.try_stage_removal()) {
    throw std::logic_error("agent staged for removal twice");
  }
  deltas_[slot].removals.push_back(h);
}

void CommitBuffer::stage_addition(Agent* a, int domain, int slot) {
  deltas_[slot].additions[domain].push_back(a);
}

bool CommitBuffer::anything_staged() const {
  for (const auto& d : deltas_) {
    if (!d.removals.empty()) return true;
    for (const auto& v : d.additions) {
      if (!v.empty()) return true;
    }
  }
  return false;
}

std::uint64_t CommitBuffer::staged_removals() const {
  std::uint64_t n = 0;
  for (const auto& d : deltas_) n += d.removals.size();
  return n;
}

void CommitBuffer::discard(ResourceManager& rm) {
  for (auto& d : deltas_) {
    for (const AgentHandle& h : d.removals) {
      rm.agent(h).clear_staged_removal();
    }
    d.removals.clear();
    for (auto& per_domain : d.additions) {
      for (Agent* a : per_domain) rm.destroy_agent(a);
      per_domain.clear();
    }
  }
}

void CommitBuffer::for_each_staged_addition(
    const std::function<void(Agent&)>& fn) const {
  for (const auto& d : deltas_) {
    for (const auto& per_domain : d.additions) {
      for (Agent* a : per_domain) fn(*a);
    }
  }
}

CommitStats CommitBuffer::commit(ResourceManager& rm, WorkerPool& pool) {
  CommitStats stats;
  const int domains = rm.domain_count();

  // Removals first: additions always land at the tail of a compacted array.
  std::vector<std::vector<std::uint32_t>> removed_by_domain(domains);
  for (auto& delta : deltas_) {
    for (const AgentHandle& h : delta.removals) {
      removed_by_domain[h.domain].push_back(h.index);
    }
    delta.removals.clear();
  }
  bool any_removed = false;
  for (int d = 0; d < domains; ++d) {
    if (removed_by_domain[d].empty()) continue;
    any_removed = true;
    stats.removed += removed_by_domain[d].size();
    stats.aux_elements +=
        remove_agents_parallel(rm, d, removed_by_domain[d], pool);
  }
  if (any_removed) rm.bump_epoch();

  // Additions: per-slot counts give every slot a disjoint output range.
  bool any_added = false;
  for (int d = 0; d < domains; ++d) {
    std::uint64_t total = 0;
    for (const auto& delta : deltas_) total += delta.additions[d].size();
    if (total == 0) continue;
    any_added = true;
    stats.added += total;
    auto& storage = rm.domain_storage(d);
    std::size_t base = storage.size();
    storage.resize(base + total);
    std::size_t cursor = base;
    std::vector<std::pair<std::size_t, Delta*>> ranges;
    for (auto& delta : deltas_) {
      if (delta.additions[d].empty()) continue;
      ranges.emplace_back(cursor, &delta);
      cursor += delta.additions[d].size();
    }
    rm.ensure_uid_capacity();
    pool.run([&](WorkerContext& ctx) {
      auto [lo, hi] =
          WorkerPool::even_chunk(ranges.size(), ctx.worker_id,
                                 pool.worker_count());
      for (std::size_t q = lo; q < hi; ++q) {
        auto [start, delta] = ranges[q];
        auto& list = delta->additions[d];
        for (std::size_t k = 0; k < list.size(); ++k) {
          storage[start + k] = list[k];
          rm.set_uid_handle(
              list[k]->uid(),
              {static_cast<std::uint32_t>(d),
               static_cast<std::uint32_t>(start + k)});
        }
      }
    });
    for (auto& delta : deltas_) delta.additions[d].clear();
  }
  (void)any_added;
  return stats;
}

}  // namespace absim
