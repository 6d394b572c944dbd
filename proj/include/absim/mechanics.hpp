#pragma once

#include "absim/agent.hpp"
#include "absim/vec3.hpp"

namespace absim {

// Linear-spring overlap repulsion: zero unless the spheres overlap, else
// k * overlap_depth along the center line, pushing `a` away from `b`.
// Antisymmetric by construction, including for coincident centers, where the
// direction comes from a generator keyed on the unordered uid pair so both
// sides compute opposite forces no matter which thread evaluates them.
Vec3 pairwise_repulsion(const Agent& a, const Agent& b,
                        double repulsion_coefficient);

}  // namespace absim
