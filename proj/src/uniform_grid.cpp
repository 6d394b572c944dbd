#include "absim/uniform_grid.hpp"

#include <sched.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace absim {

namespace {
constexpr std::uint64_t kMaxBoxes = std::uint64_t{1} << 31;
}

UniformGrid::UniformGrid(ResourceManager& rm, WorkerPool& pool)
    : UniformGrid(rm, pool, Config{}) {}

UniformGrid::UniformGrid(ResourceManager& rm, WorkerPool& pool, Config cfg)
    : rm_(rm), pool_(pool), cfg_(cfg) {
  if (cfg_.fixed_box_length < 0.0) {
    throw std::invalid_argument("fixed_box_length must be >= 0");
  }
  successors_.resize(rm_.domain_count());
}

std::uint64_t UniformGrid::box_index_of(const Vec3& p) const {
  std::uint64_t c[3];
  for (int k = 0; k < 3; ++k) {
    double rel = (p[k] - origin_[k]) / box_length_;
    auto i = static_cast<std::int64_t>(std::floor(rel));
    i = std::clamp<std::int64_t>(i, 0, dims_[k] - 1);
    c[k] = static_cast<std::uint64_t>(i);
  }
  return c[0] + dims_[0] * (c[1] + std::uint64_t{dims_[1]} * c[2]);
}

void UniformGrid::refresh_box(Box& b) {
  for (;;) {
    std::uint64_t s = b.stamp.load(std::memory_order_acquire);
    if (s == stamp_) return;
    if (s == kResetting) {
      do {
        sched_yield();
      } while (b.stamp.load(std::memory_order_acquire) != stamp_);
      return;
    }
    if (b.stamp.compare_exchange_weak(s, kResetting,
                                      std::memory_order_acq_rel)) {
      b.head.store(kNil, std::memory_order_relaxed);
      b.count.store(0, std::memory_order_relaxed);
      b.stamp.store(stamp_, std::memory_order_release);
      return;
    }
  }
}

void UniformGrid::update() {
  const auto sizes = rm_.domain_sizes();
  const auto offsets = rm_.flat_offsets();
  const std::uint64_t total = offsets.back();
  indexed_agents_ = total;
  ++stamp_;

  if (total == 0) {
    dims_ = {1, 1, 1};
    origin_ = {};
    box_length_ = cfg_.fixed_box_length > 0.0 ? cfg_.fixed_box_length : 1.0;
    largest_diameter_ = 0.0;
    return;
  }

  // Pass 1: bounding volume and largest diameter.
  struct Partial {
    Vec3 lo{std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};
    double max_diameter = 0.0;
    char pad[64];
  };
  std::vector<Partial> partials(pool_.worker_count());
  pool_.run([&](WorkerContext& ctx) {
    Partial& p = partials[ctx.worker_id];
    for (std::uint32_t d = 0; d < sizes.size(); ++d) {
      auto [lo, hi] =
          WorkerPool::even_chunk(sizes[d], ctx.worker_id, ctx.worker_count());
      auto& storage = rm_.domain_storage(d);
      for (std::size_t i = lo; i < hi; ++i) {
        const Agent& a = *storage[i];
        for (int k = 0; k < 3; ++k) {
          p.lo[k] = std::min(p.lo[k], a.position()[k]);
          p.hi[k] = std::max(p.hi[k], a.position()[k]);
        }
        p.max_diameter = std::max(p.max_diameter, a.diameter());
      }
    }
  });
  Vec3 lo = partials[0].lo, hi = partials[0].hi;
  largest_diameter_ = 0.0;
  for (const auto& p : partials) {
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], p.lo[k]);
      hi[k] = std::max(hi[k], p.hi[k]);
    }
    largest_diameter_ = std::max(largest_diameter_, p.max_diameter);
  }

  for (int k = 0; k < 3; ++k) {
    if (!std::isfinite(lo[k]) || !std::isfinite(hi[k])) {
      throw std::runtime_error("agent positions are not finite");
    }
  }

  if (cfg_.fixed_box_length > 0.0) {
    if (largest_diameter_ > cfg_.fixed_box_length) {
      std::ostringstream os;
      os << "fixed box length " << cfg_.fixed_box_length
         << " is smaller than the largest agent diameter "
         << largest_diameter_;
      throw std::runtime_error(os.str());
    }
    box_length_ = cfg_.fixed_box_length;
  } else {
    box_length_ = largest_diameter_;
  }
  origin_ = lo;
  std::uint64_t needed = 1;
  for (int k = 0; k < 3; ++k) {
    auto n = static_cast<std::uint64_t>(
                 std::floor((hi[k] - lo[k]) / box_length_)) +
             1;
    dims_[k] = static_cast<std::uint32_t>(std::max<std::uint64_t>(1, n));
    needed *= dims_[k];
  }
  if (needed > kMaxBoxes) {
    throw std::runtime_error("grid would exceed the box budget");
  }

  // The box array is only ever grown; stale contents are neutralized by the
  // stamp, so no per-update clearing happens.
  if (needed > box_capacity_) {
    boxes_ = std::make_unique<Box[]>(needed);
    box_capacity_ = needed;
  }
  for (std::uint32_t d = 0; d < sizes.size(); ++d) {
    successors_[d].resize(sizes[d]);
  }

  // Pass 2: concurrent insertion, one list push per agent.
  pool_.run([&](WorkerContext& ctx) {
    for (std::uint32_t d = 0; d < sizes.size(); ++d) {
      auto [ilo, ihi] =
          WorkerPool::even_chunk(sizes[d], ctx.worker_id, ctx.worker_count());
      auto& storage = rm_.domain_storage(d);
      for (std::size_t i = ilo; i < ihi; ++i) {
        Box& box = boxes_[box_index_of(storage[i]->position())];
        refresh_box(box);
        const std::uint64_t packed = AgentHandle{d, static_cast<std::uint32_t>(i)}.packed();
        std::uint64_t prev =
            box.head.exchange(packed, std::memory_order_acq_rel);
        successors_[d][i] = prev;
        box.count.fetch_add(1, std::memory_order_relaxed);
      }
    }
  });
}

void UniformGrid::for_each_neighbor(const AgentHandle& query,
                                    const Vec3& center, double squared_radius,
                                    NeighborVisitor& visitor) {
  if (indexed_agents_ == 0) return;
  if (squared_radius > box_length_ * box_length_ * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "query radius^2 " << squared_radius
       << " exceeds the grid box length^2 " << box_length_ * box_length_;
    throw std::invalid_argument(os.str());
  }
  // Visit only boxes the query sphere can reach. With radius <= box length
  // that is never more than the 3x3x3 neighborhood, and for small radii
  // (e.g. contact forces under an attraction-sized box) it is far less.
  const double radius = std::sqrt(squared_radius);
  std::int64_t lo[3], hi[3];
  for (int k = 0; k < 3; ++k) {
    lo[k] = std::max<std::int64_t>(
        0, static_cast<std::int64_t>(
               std::floor((center[k] - radius - origin_[k]) / box_length_)));
    hi[k] = std::min<std::int64_t>(
        dims_[k] - 1,
        static_cast<std::int64_t>(
            std::floor((center[k] + radius - origin_[k]) / box_length_)));
  }
  // Conservative box cull: slack mirrors the radius check above, so a box
  // holding an agent at exactly the query radius is never skipped.
  const double cull = squared_radius * (1.0 + 1e-12);
  for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y) {
      for (std::int64_t x = lo[0]; x <= hi[0]; ++x) {
        double min_d2 = 0.0;
        const std::int64_t at[3] = {x, y, z};
        for (int k = 0; k < 3; ++k) {
          const double b0 =
              origin_[k] + static_cast<double>(at[k]) * box_length_;
          const double b1 = b0 + box_length_;
          const double gap =
              center[k] < b0 ? b0 - center[k]
                             : (center[k] > b1 ? center[k] - b1 : 0.0);
          min_d2 += gap * gap;
        }
        if (min_d2 > cull) continue;
        const Box& box =
            boxes_[x + dims_[0] * (y + std::uint64_t{dims_[1]} * z)];
        if (box.stamp.load(std::memory_order_acquire) != stamp_) continue;
        std::uint64_t packed = box.head.load(std::memory_order_acquire);
        while (packed != kNil) {
          AgentHandle h = AgentHandle::unpack(packed);
          if (!(h == query)) {
            Agent& a = rm_.agent(h);
            double d2 = squared_distance(center, a.position());
            if (d2 <= squared_radius) visitor.visit(a, d2);
          }
          packed = chase(packed);
        }
      }
    }
  }
}

std::uint32_t UniformGrid::box_agent_count(std::uint64_t box) const {
  const Box& b = boxes_[box];
  if (b.stamp.load(std::memory_order_acquire) != stamp_) return 0;
  return b.count.load(std::memory_order_relaxed);
}

void UniformGrid::for_each_agent_in_box(
    std::uint64_t box, const std::function<void(AgentHandle)>& fn) const {
  const Box& b = boxes_[box];
  if (b.stamp.load(std::memory_order_acquire) != stamp_) return;
  std::uint64_t packed = b.head.load(std::memory_order_acquire);
  while (packed != kNil) {
    fn(AgentHandle::unpack(packed));
    packed = chase(packed);
  }
}

}  // namespace absim
