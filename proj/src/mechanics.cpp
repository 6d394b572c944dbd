#include "absim/mechanics.hpp"

#include <algorithm>
#include <cmath>

#include "absim/random.hpp"

namespace absim {

Vec3 pairwise_repulsion(const Agent& a, const Agent& b,
                        double repulsion_coefficient) {
  const Vec3 d = a.position() - b.position();
  const double dist = d.norm();
  const double overlap = 0.5 * (a.diameter() + b.diameter()) - dist;
  if (overlap <= 0.0) return {};
  if (dist > 0.0) {
    return d * (repulsion_coefficient * overlap / dist);
  }
  // Coincident centers: no center line. Derive a separation direction from
  // the uid pair and flip it for the larger uid.
  const AgentUid lo = std::min(a.uid(), b.uid());
  const AgentUid hi = std::max(a.uid(), b.uid());
  std::uint64_t counter = 0;
  Vec3 dir = RandomStream(lo, hi, &counter).unit_vector();
  if (a.uid() != lo) dir *= -1.0;
  return dir * (repulsion_coefficient * overlap);
}

}  // namespace absim
