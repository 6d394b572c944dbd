#pragma once

#include <cstdint>
#include <numbers>

#include "absim/vec3.hpp"

namespace absim {

// Counter-based generator: every draw is a pure function of
// (root seed, stream id, counter). Agents own one stream each (keyed by uid),
// so results do not depend on thread count or scheduling order.
inline std::uint64_t rng_word(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
  // splitmix64 finalizer applied to the combined key, twice for avalanche
  // across all three inputs.
  std::uint64_t x = seed;
  x += 0x9e3779b97f4a7c15ull * (stream + 0x632be59bd9b4e019ull);
  x += 0xbf58476d1ce4e5b9ull * (counter + 1);
  for (int i = 0; i < 2; ++i) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
  }
  return x;
}

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream,
               std::uint64_t* counter)
      : seed_(seed), stream_(stream), counter_(counter) {}

  std::uint64_t next_u64() { return rng_word(seed_, stream_, (*counter_)++); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  Vec3 unit_vector() {
    double z = uniform(-1.0, 1.0);
    double phi = uniform(0.0, 2.0 * std::numbers::pi);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t* counter_;
};

}  // namespace absim
