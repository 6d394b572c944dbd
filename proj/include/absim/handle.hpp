#pragma once

#include <cstdint>
#include <functional>

namespace absim {

// Identifies a live agent by its storage slot: (memory domain, index within
// that domain's array). Handles are invalidated by operations that reshuffle
// storage (removal commits, sorting); stable identity across those is the
// agent uid.
struct AgentHandle {
  std::uint32_t domain = 0;
  std::uint32_t index = 0;

  friend bool operator==(const AgentHandle&, const AgentHandle&) = default;
  friend auto operator<=>(const AgentHandle&, const AgentHandle&) = default;

  std::uint64_t packed() const {
    return (static_cast<std::uint64_t>(domain) << 32) | index;
  }
  static AgentHandle unpack(std::uint64_t v) {
    return {static_cast<std::uint32_t>(v >> 32),
            static_cast<std::uint32_t>(v & 0xffffffffu)};
  }
};

using AgentUid = std::uint64_t;

inline constexpr AgentUid kInvalidUid = ~static_cast<AgentUid>(0);

}  // namespace absim

template <>
struct std::hash<absim::AgentHandle> {
  std::size_t operator()(const absim::AgentHandle& h) const noexcept {
    return std::hash<std::uint64_t>{}(h.packed());
  }
};
