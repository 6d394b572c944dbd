#include "absim/sort_balance.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>

#include "absim/morton.hpp"
#include "absim/prefix_sum.hpp"

namespace absim {

namespace {

std::uint64_t flat_box_index(const std::array<std::uint32_t, 3>& c,
                             const std::array<std::uint32_t, 3>& dims) {
  return c[0] +
         std::uint64_t{dims[0]} * (c[1] + std::uint64_t{dims[1]} * c[2]);
}

}  // namespace

SortOutcome sort_and_balance(ResourceManager& rm, UniformGrid& grid,
                             WorkerPool& pool, bool use_extra_memory) {
  const int domain_count = rm.domain_count();
  const Topology& topo = pool.topology();
  if (topo.domain_count() != domain_count) {
    throw std::logic_error("worker pool and agent storage disagree on domains");
  }

  SortOutcome out;
  out.domain_share.assign(domain_count, 0);

  const std::uint64_t total = rm.total_agents();
  if (grid.total_agents_indexed() != total) {
    throw std::logic_error(
        "sort requires a grid updated for the current agents");
  }
  if (total == 0) return out;

  const auto dims = grid.dims();
  const OffsetsTable table = OffsetsTable::build(dims);
  const std::uint64_t boxes = table.in_space_boxes();
  out.boxes = boxes;

  // Agents per box in curve order; the scan turns it into an exclusive
  // prefix, and the extra trailing slot becomes the grand total.
  std::vector<std::uint64_t> prefix(boxes + 1, 0);
  pool.run([&](WorkerContext& ctx) {
    auto chunk =
        WorkerPool::even_chunk(boxes, ctx.worker_id, ctx.worker_count());
    OffsetsTable::Cursor cur;
    for (std::uint64_t r = chunk.first; r < chunk.second; ++r) {
      prefix[r] = grid.box_agent_count(
          flat_box_index(table.rank_to_coords(cur, r), dims));
    }
  });
  if (exclusive_prefix_sum(pool, prefix) != total) {
    throw std::logic_error("grid population changed during sort");
  }

  // Domain boundaries in curve-rank space: each domain targets an agent
  // share proportional to its thread count, snapped forward to the next box
  // edge so a box is never split across domains.
  std::vector<std::uint64_t> boundary(domain_count + 1, 0);
  boundary[domain_count] = boxes;
  const std::uint64_t workers = pool.worker_count();
  std::uint64_t cum_threads = 0;
  for (int d = 1; d < domain_count; ++d) {
    cum_threads += topo.domains[d - 1].threads;
    const std::uint64_t target = total * cum_threads / workers;
    boundary[d] = std::lower_bound(prefix.begin() + boundary[d - 1],
                                   prefix.begin() + boxes, target) -
                  prefix.begin();
  }
  for (int d = 0; d < domain_count; ++d) {
    out.domain_share[d] = prefix[boundary[d + 1]] - prefix[boundary[d]];
  }

  // Old arrays stay addressable through grid handles while workers fill the
  // replacement arrays in curve order.
  std::vector<std::vector<Agent*>> old_storage(domain_count);
  for (int d = 0; d < domain_count; ++d) {
    old_storage[d] = std::move(rm.domain_storage(d));
    rm.domain_storage(d).assign(out.domain_share[d], nullptr);
  }

  std::atomic<std::uint64_t> moved{0};
  pool.run([&](WorkerContext& ctx) {
    const int dom = ctx.domain;
    const int dom_workers = topo.domains[dom].threads;
    std::vector<Agent*>& fresh = rm.domain_storage(dom);
    const auto slice = WorkerPool::even_chunk(out.domain_share[dom],
                                              ctx.domain_rank, dom_workers);
    const std::uint64_t a0 = slice.first;
    const std::uint64_t a1 = slice.second;
    std::uint64_t local_moved = 0;
    if (a0 < a1) {
      const std::uint64_t first_agent = prefix[boundary[dom]] + a0;
      // The slice may start mid-chain: find the box holding its first agent
      // and skip that box's earlier chain entries.
      std::uint64_t rank =
          static_cast<std::uint64_t>(
              std::upper_bound(prefix.begin(), prefix.begin() + boxes,
                               first_agent) -
              prefix.begin()) -
          1;
      std::uint64_t skip = first_agent - prefix[rank];
      std::uint64_t written = 0;
      const std::uint64_t need = a1 - a0;
      OffsetsTable::Cursor cur;
      while (written < need && rank < boxes) {
        const std::uint64_t box =
            flat_box_index(table.rank_to_coords(cur, rank), dims);
        grid.for_each_agent_in_box(box, [&](AgentHandle h) {
          if (skip > 0) {
            --skip;
            return;
          }
          if (written == need) return;
          Agent* old = old_storage[h.domain][h.index];
          fresh[a0 + written] = rm.clone_agent(*old, dom);
          ++written;
          if (static_cast<int>(h.domain) != dom) ++local_moved;
          if (!use_extra_memory) rm.destroy_agent(old);
        });
        ++rank;
      }
    }
    moved.fetch_add(local_moved, std::memory_order_relaxed);
    ctx.barrier();
    for (std::uint64_t i = a0; i < a1; ++i) {
      rm.set_uid_handle(fresh[i]->uid(),
                        AgentHandle{static_cast<std::uint32_t>(dom),
                                    static_cast<std::uint32_t>(i)});
    }
    if (use_extra_memory) {
      const auto olds = WorkerPool::even_chunk(old_storage[dom].size(),
                                               ctx.domain_rank, dom_workers);
      for (std::size_t i = olds.first; i < olds.second; ++i) {
        rm.destroy_agent(old_storage[dom][i]);
      }
    }
  });

  rm.bump_epoch();
  out.agents_moved = moved.load(std::memory_order_relaxed);
  return out;
}

}  // namespace absim
