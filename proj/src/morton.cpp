#include "absim/morton.hpp"

#include <algorithm>
#include <stdexcept>

namespace absim {

namespace {

// Spreads the low 21 bits of v so bit i lands on bit 3i.
std::uint64_t spread3(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | v << 32) & 0x1f00000000ffff;
  v = (v | v << 16) & 0x1f0000ff0000ff;
  v = (v | v << 8) & 0x100f00f00f00f00f;
  v = (v | v << 4) & 0x10c30c30c30c30c3;
  v = (v | v << 2) & 0x1249249249249249;
  return v;
}

std::uint64_t compact3(std::uint64_t v) {
  v &= 0x1249249249249249;
  v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3;
  v = (v ^ (v >> 4)) & 0x100f00f00f00f00f;
  v = (v ^ (v >> 8)) & 0x1f0000ff0000ff;
  v = (v ^ (v >> 16)) & 0x1f00000000ffff;
  v = (v ^ (v >> 32)) & 0x1fffff;
  return v;
}

// Spreads the low 31 bits of v so bit i lands on bit 2i.
std::uint64_t spread2(std::uint64_t v) {
  v &= 0x7fffffff;
  v = (v | v << 16) & 0x0000ffff0000ffff;
  v = (v | v << 8) & 0x00ff00ff00ff00ff;
  v = (v | v << 4) & 0x0f0f0f0f0f0f0f0f;
  v = (v | v << 2) & 0x3333333333333333;
  v = (v | v << 1) & 0x5555555555555555;
  return v;
}

std::uint64_t compact2(std::uint64_t v) {
  v &= 0x5555555555555555;
  v = (v ^ (v >> 1)) & 0x3333333333333333;
  v = (v ^ (v >> 2)) & 0x0f0f0f0f0f0f0f0f;
  v = (v ^ (v >> 4)) & 0x00ff00ff00ff00ff;
  v = (v ^ (v >> 8)) & 0x0000ffff0000ffff;
  v = (v ^ (v >> 16)) & 0x00000000ffffffff;
  return v;
}

}  // namespace

std::uint64_t morton_encode3(std::uint32_t x, std::uint32_t y,
                             std::uint32_t z) {
  if (x >= (1u << 21) || y >= (1u << 21) || z >= (1u << 21)) {
    throw std::out_of_range("3D coordinates limited to 21 bits");
  }
  return spread3(x) | spread3(y) << 1 | spread3(z) << 2;
}

std::uint64_t morton_encode2(std::uint32_t x, std::uint32_t y) {
  if (x >= (1u << 31) || y >= (1u << 31)) {
    throw std::out_of_range("2D coordinates limited to 31 bits");
  }
  return spread2(x) | spread2(y) << 1;
}

std::array<std::uint32_t, 3> morton_decode3(std::uint64_t code) {
  return {static_cast<std::uint32_t>(compact3(code)),
          static_cast<std::uint32_t>(compact3(code >> 1)),
          static_cast<std::uint32_t>(compact3(code >> 2))};
}

std::array<std::uint32_t, 2> morton_decode2(std::uint64_t code) {
  return {static_cast<std::uint32_t>(compact2(code)),
          static_cast<std::uint32_t>(compact2(code >> 1))};
}

namespace {

struct TableBuilder {
  std::array<std::uint32_t, 3> dims;
  int d;  // 2 or 3
  std::uint64_t counter = 0;
  std::uint64_t offset = 0;
  bool found_gap = true;
  std::vector<OffsetEntry> entries;

  std::uint64_t leaves(int level) const {
    return std::uint64_t{1} << (level * d);
  }

  // Node at `level` covers [c[k], c[k] + 2^level) per axis.
  void visit(int level, std::uint32_t x, std::uint32_t y, std::uint32_t z) {
    const std::uint64_t side = std::uint64_t{1} << level;
    const bool empty = x >= dims[0] || y >= dims[1] || (d == 3 && z >= dims[2]);
    if (empty) {
      offset += leaves(level);
      found_gap = true;
      return;
    }
    const bool complete = x + side <= dims[0] && y + side <= dims[1] &&
                          (d == 2 || z + side <= dims[2]);
    if (complete) {
      if (found_gap) {
        entries.push_back({counter, offset});
        found_gap = false;
      }
      counter += leaves(level);
      return;
    }
    const std::uint32_t half = static_cast<std::uint32_t>(side / 2);
    const int children = 1 << d;
    for (int c = 0; c < children; ++c) {
      visit(level - 1, x + ((c & 1) ? half : 0), y + ((c & 2) ? half : 0),
            z + ((c & 4) ? half : 0));
    }
  }
};

}  // namespace

OffsetsTable OffsetsTable::build(const std::array<std::uint32_t, 3>& dims) {
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) {
    throw std::invalid_argument("grid dimensions must be positive");
  }
  TableBuilder b;
  b.dims = dims;
  b.d = dims[2] == 1 ? 2 : 3;

  std::uint32_t max_dim = std::max({dims[0], dims[1], b.d == 3 ? dims[2] : 1u});
  int level = 0;
  while ((std::uint64_t{1} << level) < max_dim) ++level;
  b.entries.reserve(8);
  b.visit(level, 0, 0, 0);

  OffsetsTable t;
  t.dims_ = dims;
  t.in_space_ = std::uint64_t{dims[0]} * dims[1] * dims[2];
  t.entries_ = std::move(b.entries);
  return t;
}

std::uint64_t OffsetsTable::rank_to_morton(std::uint64_t rank) const {
  if (rank >= in_space_) throw std::out_of_range("rank past the grid");
  auto it = std::upper_bound(
      entries_.begin(), entries_.end(), rank,
      [](std::uint64_t r, const OffsetEntry& e) { return r < e.start_rank; });
  return rank + std::prev(it)->offset;
}

std::uint64_t OffsetsTable::rank_to_morton(Cursor& cursor,
                                           std::uint64_t rank) const {
  if (rank >= in_space_) throw std::out_of_range("rank past the grid");
  while (cursor.entry + 1 < entries_.size() &&
         entries_[cursor.entry + 1].start_rank <= rank) {
    ++cursor.entry;
  }
  if (entries_[cursor.entry].start_rank > rank) cursor.entry = 0;
  while (cursor.entry + 1 < entries_.size() &&
         entries_[cursor.entry + 1].start_rank <= rank) {
    ++cursor.entry;
  }
  return rank + entries_[cursor.entry].offset;
}

std::array<std::uint32_t, 3> OffsetsTable::rank_to_coords(
    std::uint64_t rank) const {
  const std::uint64_t code = rank_to_morton(rank);
  if (dimensions() == 2) {
    auto xy = morton_decode2(code);
    return {xy[0], xy[1], 0};
  }
  return morton_decode3(code);
}

std::array<std::uint32_t, 3> OffsetsTable::rank_to_coords(
    Cursor& cursor, std::uint64_t rank) const {
  const std::uint64_t code = rank_to_morton(cursor, rank);
  if (dimensions() == 2) {
    auto xy = morton_decode2(code);
    return {xy[0], xy[1], 0};
  }
  return morton_decode3(code);
}

}  // namespace absim
