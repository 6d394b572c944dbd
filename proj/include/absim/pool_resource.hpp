#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "absim/memory_resource.hpp"

namespace absim {

struct PoolConfig {
  // Each new block of a size class is this factor bigger than the previous
  // one (in segments, rounded up), so a pool reaches steady state after a
  // logarithmic number of block allocations.
  double growth_rate = 2.0;
  // Segment size = page_size << aligned_pages_shift. Segments are aligned to
  // their own size, which lets deallocation find the segment header by
  // masking the slot address.
  unsigned aligned_pages_shift = 5;
  // A thread-private free list larger than this many bytes migrates batches
  // of slots to the domain's central list.
  std::size_t migration_threshold_bytes = std::size_t{1} << 20;
};

struct SizeClassStats {
  std::size_t element_size = 0;
  std::uint64_t blocks = 0;
  std::uint64_t segments_initialized = 0;
  std::uint64_t central_free = 0;
  std::uint64_t private_free = 0;
  std::uint64_t live = 0;
  std::uint64_t slots_carved = 0;
  std::uint64_t batch_migrations = 0;
  std::uint64_t max_block_waste_bytes = 0;
  std::uint64_t max_private_bytes_after_free = 0;
  std::uint64_t max_alloc_steps = 0;
  std::uint64_t max_free_steps = 0;
};

struct PoolStats {
  std::vector<SizeClassStats> classes;
  std::uint64_t oversize_live = 0;
  std::uint64_t oversize_allocations = 0;
  std::uint64_t batch_migrations() const {
    std::uint64_t n = 0;
    for (const auto& c : classes) n += c.batch_migrations;
    return n;
  }
};

class SizeClassPool;

// Size-class pool allocator with per-domain arenas. Every size class keeps,
// per domain: exponentially growing blocks of segment-aligned memory,
// a mutex-protected central list of free-slot batches, and lock-free
// thread-private free lists (one per thread slot). Segments are initialized
// lazily, one at a time, and start with an 8-byte back-reference to their
// owning arena, so deallocation is address masking plus a list push.
// Allocations larger than a segment's usable bytes fall through to the
// system allocator, routed by the byte count passed to deallocate.
class PoolResource final : public MemoryResource {
 public:
  static constexpr std::size_t kSegmentHeaderBytes = 8;

  explicit PoolResource(int domain_count, const PoolConfig& cfg = {});
  ~PoolResource() override;

  void* allocate(std::size_t bytes, int domain) override;
  void deallocate(void* p, std::size_t bytes) override;
  const char* name() const override { return "pool"; }

  std::size_t page_bytes() const { return page_bytes_; }
  std::size_t segment_bytes() const { return segment_bytes_; }
  std::size_t max_pooled_bytes() const {
    return segment_bytes_ - kSegmentHeaderBytes;
  }
  int domain_count() const { return domain_count_; }
  const PoolConfig& config() const { return config_; }

  // Aggregated over all domains; callers must be quiescent.
  PoolStats stats() const;

 private:
  SizeClassPool* class_for(std::size_t bytes);

  PoolConfig config_;
  int domain_count_;
  std::size_t page_bytes_;
  std::size_t segment_bytes_;
  std::vector<std::atomic<SizeClassPool*>> classes_;
  std::mutex create_mutex_;
  std::atomic<std::uint64_t> oversize_live_{0};
  std::atomic<std::uint64_t> oversize_allocations_{0};
};

}  // namespace absim
