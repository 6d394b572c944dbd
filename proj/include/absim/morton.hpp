#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace absim {

// Bit-interleaved space-filling-curve codes. 3D: x occupies bits 3i, y bits
// 3i+1, z bits 3i+2 (21 bits per axis); 2D: x bits 2i, y bits 2i+1 (31 bits
// per axis). Out-of-range coordinates throw std::out_of_range.
std::uint64_t morton_encode3(std::uint32_t x, std::uint32_t y,
                             std::uint32_t z);
std::uint64_t morton_encode2(std::uint32_t x, std::uint32_t y);
std::array<std::uint32_t, 3> morton_decode3(std::uint64_t code);
std::array<std::uint32_t, 2> morton_decode2(std::uint64_t code);

// For grids whose axes are not powers of two, Morton codes of in-space boxes
// have gaps. The table stores one entry per contiguous run of in-space
// codes: starting from in-space rank `start_rank`, code = rank + `offset`.
// It is built by a depth-first walk of the implicit 2^d-ary tree over the
// enclosing power-of-two cube, descending only into nodes that are partially
// in space, so construction needs O(log #boxes) working space and the table
// O(#runs) storage.
struct OffsetEntry {
  std::uint64_t start_rank = 0;
  std::uint64_t offset = 0;
  friend bool operator==(const OffsetEntry&, const OffsetEntry&) = default;
};

class OffsetsTable {
 public:
  // dims[2] == 1 builds a 2D table over (x, y); any other value a 3D one.
  static OffsetsTable build(const std::array<std::uint32_t, 3>& dims);

  const std::vector<OffsetEntry>& entries() const { return entries_; }
  int dimensions() const { return dims_[2] == 1 ? 2 : 3; }
  const std::array<std::uint32_t, 3>& dims() const { return dims_; }
  std::uint64_t in_space_boxes() const { return in_space_; }

  // Morton code of the box with the given in-space rank (0-based, ranks
  // follow Morton order). O(log #runs).
  std::uint64_t rank_to_morton(std::uint64_t rank) const;

  // Amortized O(1) variant for nondecreasing rank sequences.
  struct Cursor {
    std::size_t entry = 0;
  };
  std::uint64_t rank_to_morton(Cursor& cursor, std::uint64_t rank) const;

  // Grid coordinates of the box at the given rank.
  std::array<std::uint32_t, 3> rank_to_coords(std::uint64_t rank) const;
  std::array<std::uint32_t, 3> rank_to_coords(Cursor& cursor,
                                              std::uint64_t rank) const;

 private:
  std::array<std::uint32_t, 3> dims_{1, 1, 1};
  std::uint64_t in_space_ = 0;
  std::vector<OffsetEntry> entries_;
};

}  // namespace absim
