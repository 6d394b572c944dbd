#include "absim/block_schedule.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace absim {

namespace {

struct BlockLayout {
  std::vector<BlockRef> blocks;          // grouped by domain
  std::vector<std::uint32_t> first;      // first block id of each domain, +sentinel

  std::uint32_t domain_begin(int d) const { return first[d]; }
  std::uint32_t domain_end(int d) const { return first[d + 1]; }
};

BlockLayout make_layout(const std::vector<std::uint32_t>& domain_sizes,
                        std::uint32_t block_size) {
  if (block_size == 0) throw std::invalid_argument("block size must be > 0");
  BlockLayout layout;
  layout.first.reserve(domain_sizes.size() + 1);
  for (std::uint32_t d = 0; d < domain_sizes.size(); ++d) {
    layout.first.push_back(static_cast<std::uint32_t>(layout.blocks.size()));
    for (std::uint32_t lo = 0; lo < domain_sizes[d]; lo += block_size) {
      layout.blocks.push_back(
          {d, lo, std::min(domain_sizes[d], lo + block_size)});
    }
  }
  layout.first.push_back(static_cast<std::uint32_t>(layout.blocks.size()));
  return layout;
}

}  // namespace

void for_each_block_stealing(
    WorkerPool& pool, const std::vector<std::uint32_t>& domain_sizes,
    std::uint32_t block_size,
    const std::function<void(const BlockRef&, WorkerContext&)>& visit,
    std::vector<ClaimRecord>* claim_log, StealStats* stats) {
  const auto& topo = pool.topology();
  if (domain_sizes.size() != static_cast<std::size_t>(topo.domain_count())) {
    throw std::invalid_argument("domain_sizes does not match topology");
  }
  const BlockLayout layout = make_layout(domain_sizes, block_size);
  const std::uint32_t n_blocks =
      static_cast<std::uint32_t>(layout.blocks.size());

  std::vector<ClaimRecord> local_log;
  std::vector<ClaimRecord>& log = claim_log ? *claim_log : local_log;
  log.assign(n_blocks, ClaimRecord{});

  std::vector<std::atomic<std::uint64_t>> claims(n_blocks);
  for (auto& c : claims) c.store(0, std::memory_order_relaxed);
  std::atomic<std::uint64_t> ticket_counter{0};

  auto try_claim = [&](std::uint32_t block, ClaimLevel level,
                       WorkerContext& ctx) {
    if (claims[block].load(std::memory_order_relaxed) != 0) return;
    std::uint64_t ticket =
        1 + ticket_counter.fetch_add(1, std::memory_order_relaxed);
    std::uint64_t expected = 0;
    if (claims[block].compare_exchange_strong(expected, ticket,
                                              std::memory_order_acq_rel)) {
      log[block] = {ticket, static_cast<std::uint16_t>(ctx.worker_id), level};
      visit(layout.blocks[block], ctx);
    }
  };

  pool.run([&](WorkerContext& ctx) {
    const int d = ctx.domain;
    const std::uint32_t d_begin = layout.domain_begin(d);
    const std::uint32_t d_count = layout.domain_end(d) - d_begin;
    const int d_workers = topo.domains[d].threads;
    auto [own_lo, own_hi] =
        WorkerPool::even_chunk(d_count, ctx.domain_rank, d_workers);

    for (std::uint32_t b = own_lo; b < own_hi; ++b) {
      try_claim(d_begin + static_cast<std::uint32_t>(b), ClaimLevel::kOwned,
                ctx);
    }
    // Sweep the rest of the domain before leaving it: siblings may be slow.
    for (std::uint32_t b = layout.domain_begin(d); b < layout.domain_end(d);
         ++b) {
      try_claim(b, ClaimLevel::kSameDomain, ctx);
    }
    for (int off = 1; off < topo.domain_count(); ++off) {
      const int od = (d + off) % topo.domain_count();
      for (std::uint32_t b = layout.domain_begin(od);
           b < layout.domain_end(od); ++b) {
        try_claim(b, ClaimLevel::kCrossDomain, ctx);
      }
    }
  });

  for (std::uint32_t b = 0; b < n_blocks; ++b) {
    if (claims[b].load(std::memory_order_relaxed) == 0) {
      throw std::logic_error("block left unclaimed");
    }
  }
  if (stats) {
    for (const auto& rec : log) {
      switch (rec.level) {
        case ClaimLevel::kOwned: ++stats->owned; break;
        case ClaimLevel::kSameDomain: ++stats->same_domain; break;
        case ClaimLevel::kCrossDomain: ++stats->cross_domain; break;
      }
    }
  }
}

std::string audit_claim_log(const std::vector<ClaimRecord>& log,
                            const std::vector<std::uint32_t>& domain_sizes,
                            std::uint32_t block_size, const Topology& topo) {
  const BlockLayout layout = make_layout(domain_sizes, block_size);
  if (log.size() != layout.blocks.size()) return "log size mismatch";

  std::vector<std::uint64_t> max_ticket(domain_sizes.size(), 0);
  std::vector<std::uint64_t> seen_tickets;
  seen_tickets.reserve(log.size());
  for (std::size_t b = 0; b < log.size(); ++b) {
    if (log[b].ticket == 0) {
      std::ostringstream os;
      os << "block " << b << " was never claimed";
      return os.str();
    }
    seen_tickets.push_back(log[b].ticket);
    auto& mt = max_ticket[layout.blocks[b].domain];
    mt = std::max(mt, log[b].ticket);
  }
  std::sort(seen_tickets.begin(), seen_tickets.end());
  for (std::size_t i = 1; i < seen_tickets.size(); ++i) {
    if (seen_tickets[i] == seen_tickets[i - 1]) return "duplicate ticket";
  }
  for (std::size_t b = 0; b < log.size(); ++b) {
    if (log[b].level != ClaimLevel::kCrossDomain) continue;
    const int thief_domain = topo.worker_domain(log[b].worker);
    if (log[b].ticket <= max_ticket[thief_domain]) {
      std::ostringstream os;
      os << "cross-domain steal of block " << b << " by worker "
         << log[b].worker << " (domain " << thief_domain
         << ") drawn before that domain was exhausted";
      return os.str();
    }
  }
  return "";
}

}  // namespace absim
