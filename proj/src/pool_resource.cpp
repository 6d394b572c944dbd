#include "absim/pool_resource.hpp"

#include <unistd.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <deque>
#include <stdexcept>

namespace absim {

namespace {

int acquire_thread_slot();

struct SlotReleaser {
  int slot = acquire_thread_slot();
  ~SlotReleaser();
};

std::mutex g_slot_mutex;
std::vector<int> g_free_slots;
int g_next_slot = 0;

int acquire_thread_slot() {
  std::lock_guard lk(g_slot_mutex);
  if (!g_free_slots.empty()) {
    int s = g_free_slots.back();
    g_free_slots.pop_back();
    return s;
  }
  if (g_next_slot >= kMaxThreadSlots) {
    throw std::runtime_error("thread slot budget exhausted");
  }
  return g_next_slot++;
}

SlotReleaser::~SlotReleaser() {
  std::lock_guard lk(g_slot_mutex);
  g_free_slots.push_back(slot);
}

thread_local SlotReleaser t_slot;

// Batch of free slots chained through their first 8 bytes. Batches move
// between the private and central lists as a unit, so migrations cost O(1)
// regardless of how many slots a batch carries.
struct Batch {
  void* head = nullptr;
  void* tail = nullptr;
  std::uint32_t count = 0;
};

void*& next_of(void* p) { return *static_cast<void**>(p); }

// Debug builds stamp freed slots (past the chain pointer) and trip on a
// repeated free of a still-stamped slot. Slots too small for the stamp are
// left unchecked.
#ifndef NDEBUG
constexpr std::uint64_t kFreedStamp = 0xfeedfacefeedfaceull;

std::uint64_t& stamp_of(void* p) {
  return *reinterpret_cast<std::uint64_t*>(static_cast<char*>(p) + 8);
}

void poison_slot(void* p, std::size_t elem) {
  if (elem < 16) return;
  if (stamp_of(p) == kFreedStamp) {
    assert(false && "double free of a pooled slot");
  }
  stamp_of(p) = kFreedStamp;
}

void unpoison_slot(void* p, std::size_t elem) {
  if (elem < 16) return;
  stamp_of(p) = 0;
}
#endif

struct alignas(64) PrivateList {
  std::deque<Batch> batches;  // only the back batch may be partial
  std::uint64_t slot_count = 0;
  std::uint64_t alloc_calls = 0;
  std::uint64_t free_calls = 0;
  std::uint64_t max_alloc_steps = 0;
  std::uint64_t max_free_steps = 0;
  std::uint64_t max_bytes_after_free = 0;
};

}  // namespace

int current_thread_slot() { return t_slot.slot; }

// One size class on one memory domain.
class DomainPool {
 public:
  DomainPool(std::size_t element_size, std::size_t segment_bytes,
             const PoolConfig& cfg)
      : elem_(element_size),
        seg_bytes_(segment_bytes),
        cfg_(cfg),
        slots_per_segment_((segment_bytes - PoolResource::kSegmentHeaderBytes) /
                           element_size),
        batch_slots_(std::clamp<std::size_t>(
            cfg.migration_threshold_bytes / (4 * element_size), 1, 256)) {
    if (slots_per_segment_ == 0) {
      throw std::invalid_argument("element does not fit in a segment");
    }
    // Cap block size so that per-block waste (header + unusable tail, per
    // segment) stays within one segment + one element + one header.
    const std::size_t tail =
        (seg_bytes_ - PoolResource::kSegmentHeaderBytes) % elem_;
    const std::size_t per_segment_waste =
        PoolResource::kSegmentHeaderBytes + tail;
    const std::size_t bound =
        seg_bytes_ + elem_ + PoolResource::kSegmentHeaderBytes;
    max_block_segments_ = std::max<std::size_t>(1, bound / per_segment_waste);
    per_segment_waste_ = per_segment_waste;
  }

  ~DomainPool() {
    for (auto& b : blocks_) {
      ::operator delete(b.base, std::align_val_t(seg_bytes_));
    }
  }

  void* allocate(int slot) {
    PrivateList& pl = private_[slot];
    ++pl.alloc_calls;
    std::uint64_t steps = 1;
    if (pl.batches.empty()) steps += refill(pl);
    Batch& b = pl.batches.back();
    void* p = b.head;
    b.head = next_of(p);
#ifndef NDEBUG
    unpoison_slot(p, elem_);
#endif
    --pl.slot_count;
    if (--b.count == 0) {
      pl.batches.pop_back();
      ++steps;
    }
    pl.max_alloc_steps = std::max(pl.max_alloc_steps, steps);
    return p;
  }

  void deallocate(void* p, int slot) {
#ifndef NDEBUG
    poison_slot(p, elem_);
#endif
    PrivateList& pl = private_[slot];
    ++pl.free_calls;
    std::uint64_t steps = 1;
    if (pl.batches.empty() || pl.batches.back().count >= batch_slots_) {
      pl.batches.push_back({p, p, 1});
      ++steps;
    } else {
      Batch& b = pl.batches.back();
      next_of(p) = b.head;
      b.head = p;
      ++b.count;
    }
    ++pl.slot_count;
    if (pl.slot_count * elem_ > cfg_.migration_threshold_bytes) {
      steps += migrate(pl);
    }
    pl.max_bytes_after_free =
        std::max(pl.max_bytes_after_free, pl.slot_count * elem_);
    pl.max_free_steps = std::max(pl.max_free_steps, steps);
  }

  void collect(SizeClassStats& out) const {
    std::lock_guard lk(mutex_);
    out.blocks += blocks_.size();
    out.segments_initialized += segments_initialized_;
    out.central_free += central_slots_;
    out.slots_carved += slots_carved_;
    out.batch_migrations += migrations_;
    for (const auto& b : blocks_) {
      out.max_block_waste_bytes = std::max<std::uint64_t>(
          out.max_block_waste_bytes, b.segments * per_segment_waste_);
    }
    std::uint64_t live_delta = 0;
    for (const auto& pl : private_) {
      out.private_free += pl.slot_count;
      live_delta += pl.alloc_calls - pl.free_calls;
      out.max_alloc_steps = std::max(out.max_alloc_steps, pl.max_alloc_steps);
      out.max_free_steps = std::max(out.max_free_steps, pl.max_free_steps);
      out.max_private_bytes_after_free =
          std::max(out.max_private_bytes_after_free, pl.max_bytes_after_free);
    }
    out.live += live_delta;
  }

 private:
  struct Block {
    void* base = nullptr;
    std::size_t segments = 0;
  };

  // Returns step count for the audit. Called with the private list empty.
  std::uint64_t refill(PrivateList& pl) {
    std::lock_guard lk(mutex_);
    if (!central_.empty()) {
      pl.batches.push_back(central_.back());
      central_.pop_back();
      central_slots_ -= pl.batches.back().count;
      pl.slot_count += pl.batches.back().count;
      return 2;
    }
    Batch b = carve_batch();
    pl.slot_count += b.count;
    pl.batches.push_back(b);
    return 2 + b.count;  // carving links each slot once
  }

  // Mutex held. Hands out one batch from the bump region, initializing the
  // next segment (or allocating the next block) only when the current one
  // is exhausted.
  Batch carve_batch() {
    if (bump_ptr_ == bump_end_) {
      if (blocks_.empty() || watermark_segment_ == blocks_.back().segments) {
        Block blk;
        blk.segments = std::min(next_block_segments_, max_block_segments_);
        blk.base = ::operator new(blk.segments * seg_bytes_,
                                  std::align_val_t(seg_bytes_));
        next_block_segments_ = std::max<std::size_t>(
            next_block_segments_ + 1,
            static_cast<std::size_t>(
                std::ceil(static_cast<double>(next_block_segments_) *
                          cfg_.growth_rate)));
        blocks_.push_back(blk);
        watermark_segment_ = 0;
      }
      char* seg = static_cast<char*>(blocks_.back().base) +
                  watermark_segment_ * seg_bytes_;
      *reinterpret_cast<DomainPool**>(seg) = this;
      bump_ptr_ = seg + PoolResource::kSegmentHeaderBytes;
      bump_end_ = bump_ptr_ + slots_per_segment_ * elem_;
      ++watermark_segment_;
      ++segments_initialized_;
    }
    const std::size_t avail = (bump_end_ - bump_ptr_) / elem_;
    const std::size_t take = std::min(avail, batch_slots_);
    Batch b;
    b.count = static_cast<std::uint32_t>(take);
    b.head = bump_ptr_;
    char* p = bump_ptr_;
    for (std::size_t i = 1; i < take; ++i) {
      next_of(p) = p + elem_;
      p += elem_;
    }
    next_of(p) = nullptr;
    b.tail = p;
    bump_ptr_ += take * elem_;
    slots_carved_ += take;
    return b;
  }

  std::uint64_t migrate(PrivateList& pl) {
    std::lock_guard lk(mutex_);
    std::uint64_t steps = 0;
    while (pl.slot_count * elem_ > cfg_.migration_threshold_bytes &&
           pl.batches.size() > 1) {
      const Batch& b = pl.batches.front();
      central_.push_back(b);
      central_slots_ += b.count;
      pl.slot_count -= b.count;
      pl.batches.pop_front();
      ++migrations_;
      ++steps;
    }
    return steps;
  }

  const std::size_t elem_;
  const std::size_t seg_bytes_;
  const PoolConfig cfg_;
  const std::size_t slots_per_segment_;
  const std::size_t batch_slots_;
  std::size_t max_block_segments_ = 1;
  std::size_t per_segment_waste_ = 0;

  mutable std::mutex mutex_;
  std::vector<Block> blocks_;
  std::deque<Batch> central_;
  std::uint64_t central_slots_ = 0;
  std::size_t watermark_segment_ = 0;
  char* bump_ptr_ = nullptr;
  char* bump_end_ = nullptr;
  std::size_t next_block_segments_ = 1;
  std::uint64_t segments_initialized_ = 0;
  std::uint64_t slots_carved_ = 0;
  std::uint64_t migrations_ = 0;

  PrivateList private_[kMaxThreadSlots];
};

class SizeClassPool {
 public:
  SizeClassPool(std::size_t element_size, int domain_count,
                std::size_t segment_bytes, const PoolConfig& cfg)
      : element_size_(element_size) {
    domains_.reserve(domain_count);
    for (int d = 0; d < domain_count; ++d) {
      domains_.push_back(
          std::make_unique<DomainPool>(element_size, segment_bytes, cfg));
    }
  }

  void* allocate(int domain, int slot) {
    return domains_[domain]->allocate(slot);
  }

  SizeClassStats stats() const {
    SizeClassStats s;
    s.element_size = element_size_;
    for (const auto& d : domains_) d->collect(s);
    return s;
  }

 private:
  std::size_t element_size_;
  std::vector<std::unique_ptr<DomainPool>> domains_;
};

PoolResource::PoolResource(int domain_count, const PoolConfig& cfg)
    : config_(cfg), domain_count_(domain_count) {
  if (domain_count < 1) throw std::invalid_argument("domain_count < 1");
  if (!(cfg.growth_rate > 1.0)) {
    throw std::invalid_argument("growth_rate must be > 1");
  }
  long page = sysconf(_SC_PAGESIZE);
  page_bytes_ = page > 0 ? static_cast<std::size_t>(page) : 4096;
  segment_bytes_ = page_bytes_ << cfg.aligned_pages_shift;
  classes_ = std::vector<std::atomic<SizeClassPool*>>(
      max_pooled_bytes() / 8 + 2);
  for (auto& c : classes_) c.store(nullptr, std::memory_order_relaxed);
}

PoolResource::~PoolResource() {
  for (auto& c : classes_) delete c.load(std::memory_order_relaxed);
}

SizeClassPool* PoolResource::class_for(std::size_t bytes) {
  const std::size_t idx = (bytes + 7) / 8;
  SizeClassPool* sc = classes_[idx].load(std::memory_order_acquire);
  if (!sc) {
    std::lock_guard lk(create_mutex_);
    sc = classes_[idx].load(std::memory_order_relaxed);
    if (!sc) {
      sc = new SizeClassPool(idx * 8, domain_count_, segment_bytes_, config_);
      classes_[idx].store(sc, std::memory_order_release);
    }
  }
  return sc;
}

void* PoolResource::allocate(std::size_t bytes, int domain) {
  if (bytes == 0) bytes = 1;
  if (bytes > max_pooled_bytes()) {
    oversize_live_.fetch_add(1, std::memory_order_relaxed);
    oversize_allocations_.fetch_add(1, std::memory_order_relaxed);
    return ::operator new(bytes);
  }
  return class_for(bytes)->allocate(domain, current_thread_slot());
}

void PoolResource::deallocate(void* p, std::size_t bytes) {
  if (!p) return;
  if (bytes == 0) bytes = 1;
  if (bytes > max_pooled_bytes()) {
    oversize_live_.fetch_sub(1, std::memory_order_relaxed);
    ::operator delete(p);
    return;
  }
  // The segment header points back at the owning arena; no size-class or
  // domain lookup is needed.
  auto addr = reinterpret_cast<std::uintptr_t>(p);
  auto* seg = reinterpret_cast<DomainPool**>(addr & ~(segment_bytes_ - 1));
  (*seg)->deallocate(p, current_thread_slot());
}

PoolStats PoolResource::stats() const {
  PoolStats out;
  for (const auto& c : classes_) {
    if (SizeClassPool* sc = c.load(std::memory_order_acquire)) {
      out.classes.push_back(sc->stats());
    }
  }
  out.oversize_live = oversize_live_.load(std::memory_order_relaxed);
  out.oversize_allocations =
      oversize_allocations_.load(std::memory_order_relaxed);
  return out;
}

}  // namespace absim
