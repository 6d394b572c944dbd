#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "absim/agent.hpp"
#include "absim/mechanics.hpp"
#include "doctest.h"

using namespace absim;

TEST_CASE("spheres apart or exactly touching exert nothing") {
  Agent a(0, {0, 0, 0}, 10.0);
  Agent b(1, {30, 0, 0}, 10.0);
  CHECK(pairwise_repulsion(a, b, 2.0) == Vec3{0, 0, 0});

  Agent c(2, {10, 0, 0}, 10.0);  // center distance == sum of radii
  CHECK(pairwise_repulsion(a, c, 2.0) == Vec3{0, 0, 0});
}

TEST_CASE("overlap produces a linear push along the center line") {
  Agent a(0, {8, 0, 0}, 10.0);
  Agent b(1, {0, 0, 0}, 10.0);
  // Overlap depth 2, coefficient 2: magnitude 4 away from b.
  const Vec3 f = pairwise_repulsion(a, b, 2.0);
  CHECK(f.x == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(f.y == 0.0);
  CHECK(f.z == 0.0);

  // Doubling the coefficient doubles the force.
  CHECK(pairwise_repulsion(a, b, 4.0).x == doctest::Approx(8.0));
}

TEST_CASE("direction always points from the neighbor toward the agent") {
  Agent lo(0, {0, 0, 0}, 12.0);
  Agent hi(1, {0, 5, 0}, 12.0);
  CHECK(pairwise_repulsion(hi, lo, 1.0).y > 0.0);
  CHECK(pairwise_repulsion(lo, hi, 1.0).y < 0.0);
}

TEST_CASE("forces are exactly antisymmetric") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0.0, 30.0);
  std::uniform_real_distribution<double> diam(5.0, 25.0);
  for (int i = 0; i < 5000; ++i) {
    Agent a(2 * i, {pos(rng), pos(rng), pos(rng)}, diam(rng));
    Agent b(2 * i + 1, {pos(rng), pos(rng), pos(rng)}, diam(rng));
    const Vec3 fab = pairwise_repulsion(a, b, 2.0);
    const Vec3 fba = pairwise_repulsion(b, a, 2.0);
    REQUIRE(fab.x == -fba.x);
    REQUIRE(fab.y == -fba.y);
    REQUIRE(fab.z == -fba.z);
  }
}

TEST_CASE("coincident centers separate along a repeatable random direction") {
  Agent a(7, {5, 5, 5}, 10.0);
  Agent b(9, {5, 5, 5}, 10.0);

  const Vec3 f1 = pairwise_repulsion(a, b, 2.0);
  // Overlap equals the mean diameter; magnitude k * overlap = 20.
  CHECK(f1.norm() == doctest::Approx(20.0).epsilon(1e-12));

  // Deterministic: same pair, same direction every time.
  const Vec3 f2 = pairwise_repulsion(a, b, 2.0);
  CHECK(f1 == f2);

  // Antisymmetric even without a center line.
  const Vec3 g = pairwise_repulsion(b, a, 2.0);
  CHECK(f1.x == -g.x);
  CHECK(f1.y == -g.y);
  CHECK(f1.z == -g.z);
}

TEST_CASE("tiny separations do not blow up") {
  // overlap/dist * dist cancels, so the magnitude stays ~k * overlap even
  // when the centers are separated by 1e-13.
  Agent a(0, {0, 0, 0}, 10.0);
  Agent b(1, {1e-13, 0, 0}, 10.0);
  const Vec3 f = pairwise_repulsion(a, b, 2.0);
  CHECK(std::isfinite(f.x));
  CHECK(f.norm() == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(f.x < 0.0);  // pushes a away from b, i.e. toward -x
}

TEST_CASE("deep overlap scales with the overlap depth") {
  Agent b(1, {0, 0, 0}, 10.0);
  double prev = 0.0;
  for (double x : {9.0, 7.0, 5.0, 3.0, 1.0}) {
    Agent a(0, {x, 0, 0}, 10.0);
    const double mag = pairwise_repulsion(a, b, 2.0).norm();
    CHECK(mag == doctest::Approx(2.0 * (10.0 - x)).epsilon(1e-12));
    CHECK(mag > prev);
    prev = mag;
  }
}
