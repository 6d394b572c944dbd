#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "absim/environment.hpp"
#include "absim/memory_resource.hpp"
#include "absim/resource_manager.hpp"
#include "absim/topology.hpp"
#include "absim/uniform_grid.hpp"
#include "absim/worker_pool.hpp"
#include "doctest.h"

using namespace absim;

namespace {

struct Fixture {
  SystemResource mem;
  ResourceManager rm;
  WorkerPool pool;

  explicit Fixture(int threads = 2, int domains = 1)
      : rm(mem, domains), pool(detect_topology(threads, domains)) {}

  AgentHandle add(const Vec3& p, double diameter = 10.0) {
    return rm.push_agent(rm.make_agent(0, p, diameter));
  }
};

std::vector<AgentUid> neighbor_uids(Environment& env, ResourceManager& rm,
                                    const AgentHandle& q, double radius) {
  std::vector<AgentUid> out;
  LambdaVisitor visitor{[&](Agent& n, double) { out.push_back(n.uid()); }};
  env.for_each_neighbor(q, rm.agent(q).position(), radius * radius, visitor);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("single agent occupies one box and sees no neighbors") {
  Fixture f;
  auto h = f.add({5, 5, 5});
  UniformGrid grid(f.rm, f.pool);
  grid.update();
  CHECK(grid.total_agents_indexed() == 1);
  const auto box = grid.box_index_of(f.rm.agent(h).position());
  CHECK(grid.box_agent_count(box) == 1);
  CHECK(neighbor_uids(grid, f.rm, h, grid.box_length()).empty());
}

TEST_CASE("separated agents land in different boxes") {
  Fixture f;
  auto a = f.add({0, 0, 0}, 20.0);
  auto b = f.add({100, 0, 0}, 20.0);
  UniformGrid grid(f.rm, f.pool);
  grid.update();
  const auto ba = grid.box_index_of(f.rm.agent(a).position());
  const auto bb = grid.box_index_of(f.rm.agent(b).position());
  CHECK(grid.box_length() == 20.0);
  CHECK(ba != bb);
  CHECK(grid.box_agent_count(ba) == 1);
  CHECK(grid.box_agent_count(bb) == 1);
}

TEST_CASE("box coordinates follow floor semantics and clamp at the far corner") {
  Fixture f;
  f.add({0, 0, 0});
  f.add({100, 100, 100});
  UniformGrid grid(f.rm, f.pool, {.fixed_box_length = 20.0});
  grid.update();
  REQUIRE(grid.origin() == Vec3{0, 0, 0});

  auto coords = [&](const Vec3& p) {
    return grid.box_coords_of(grid.box_index_of(p));
  };
  CHECK(coords({0, 0, 0}) == std::array<std::uint32_t, 3>{0, 0, 0});
  CHECK(coords({19.999, 20.0, 39.9}) == std::array<std::uint32_t, 3>{0, 1, 1});
  // Exactly the max corner: floor would step one past the last box.
  const auto far = coords({100, 100, 100});
  CHECK(far[0] == grid.dims()[0] - 1);
  CHECK(far[1] == grid.dims()[1] - 1);
  CHECK(far[2] == grid.dims()[2] - 1);
}

TEST_CASE("degenerate volumes still build at least one box") {
  Fixture f;
  f.add({3, 3, 3});
  f.add({3, 3, 3});
  f.add({3, 3, 3});
  UniformGrid grid(f.rm, f.pool);
  grid.update();
  CHECK(grid.dims()[0] >= 1);
  CHECK(grid.total_agents_indexed() == 3);
  auto h0 = AgentHandle{0, 0};
  CHECK(neighbor_uids(grid, f.rm, h0, 1.0).size() == 2);
}

TEST_CASE("update with no agents leaves an empty queryable grid") {
  Fixture f;
  UniformGrid grid(f.rm, f.pool);
  grid.update();
  CHECK(grid.total_agents_indexed() == 0);
}

TEST_CASE("two agents exactly at the query radius see each other") {
  Fixture f;
  auto a = f.add({0, 0, 0}, 15.0);
  auto b = f.add({15, 0, 0}, 15.0);
  UniformGrid grid(f.rm, f.pool);
  grid.update();
  CHECK(neighbor_uids(grid, f.rm, a, 15.0) ==
        std::vector<AgentUid>{f.rm.agent(b).uid()});
  CHECK(neighbor_uids(grid, f.rm, b, 15.0) ==
        std::vector<AgentUid>{f.rm.agent(a).uid()});
  // Just inside misses once the radius shrinks below the separation.
  CHECK(neighbor_uids(grid, f.rm, a, 14.999).empty());
}

TEST_CASE("queries past the box length are rejected") {
  Fixture f;
  auto a = f.add({0, 0, 0}, 10.0);
  UniformGrid grid(f.rm, f.pool);
  grid.update();
  REQUIRE(grid.max_query_radius() == grid.box_length());
  const double r = grid.box_length() * 1.01;
  LambdaVisitor visitor{[](Agent&, double) {}};
  CHECK_THROWS_AS(
      grid.for_each_neighbor(a, f.rm.agent(a).position(), r * r, visitor),
      std::invalid_argument);
}

TEST_CASE("chains from each box cover its agents exactly once") {
  Fixture f(4, 1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0.0, 200.0);
  const int n = 700;
  for (int i = 0; i < n; ++i) f.add({pos(rng), pos(rng), pos(rng)}, 12.0);

  UniformGrid grid(f.rm, f.pool);
  grid.update();
  REQUIRE(grid.total_agents_indexed() == n);

  std::set<std::uint64_t> seen;
  std::uint64_t counted = 0;
  for (std::uint64_t box = 0; box < grid.box_count(); ++box) {
    const auto count = grid.box_agent_count(box);
    counted += count;
    std::uint64_t walked = 0;
    grid.for_each_agent_in_box(box, [&](AgentHandle h) {
      ++walked;
      REQUIRE(seen.insert(h.packed()).second);  // globally distinct
      REQUIRE(grid.box_index_of(f.rm.agent(h).position()) == box);
    });
    REQUIRE(walked == count);
  }
  CHECK(counted == n);
  CHECK(seen.size() == n);
}

TEST_CASE("neighbor sets equal the exhaustive scan on random instances") {
  Fixture f(4, 1);
  BruteForceEnvironment oracle(f.rm);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(0.0, 100.0);
  std::uniform_real_distribution<double> diam(5.0, 15.0);

  const int n = 500;
  for (int i = 0; i < n; ++i)
    f.add({pos(rng), pos(rng), pos(rng)}, diam(rng));

  UniformGrid grid(f.rm, f.pool);
  grid.update();
  oracle.update();
  const double radius = grid.box_length();

  f.rm.for_each_agent([&](Agent&, AgentHandle h) {
    REQUIRE(neighbor_uids(grid, f.rm, h, radius) ==
            neighbor_uids(oracle, f.rm, h, radius));
  });
}

TEST_CASE("stale boxes from earlier updates never leak into queries") {
  Fixture f(2, 1);
  std::mt19937_64 rng(29);

  // Wide population first: many boxes get a current timestamp.
  std::uniform_real_distribution<double> wide(0.0, 500.0);
  for (int i = 0; i < 300; ++i) f.add({wide(rng), wide(rng), wide(rng)}, 10.0);
  UniformGrid grid(f.rm, f.pool);
  BruteForceEnvironment oracle(f.rm);
  grid.update();

  // Shrink to a corner of the old volume without rebuilding storage: move
  // every agent, so all previously filled boxes are stale on re-update.
  std::uniform_real_distribution<double> tight(0.0, 60.0);
  f.rm.for_each_agent([&](Agent& a, AgentHandle) {
    a.set_position({tight(rng), tight(rng), tight(rng)});
  });

  for (int round = 0; round < 3; ++round) {
    grid.update();
    oracle.update();
    REQUIRE(grid.total_agents_indexed() == 300);
    f.rm.for_each_agent([&](Agent&, AgentHandle h) {
      REQUIRE(neighbor_uids(grid, f.rm, h, grid.box_length()) ==
              neighbor_uids(oracle, f.rm, h, grid.box_length()));
    });
  }
}

TEST_CASE("largest diameter drives the box length when not pinned") {
  Fixture f;
  f.add({0, 0, 0}, 8.0);
  f.add({40, 0, 0}, 17.5);
  UniformGrid grid(f.rm, f.pool);
  grid.update();
  CHECK(grid.largest_agent_diameter() == 17.5);
  CHECK(grid.box_length() == 17.5);

  // Growth is picked up by the next update.
  f.rm.agent({0, 0}).set_diameter(25.0);
  grid.update();
  CHECK(grid.box_length() == 25.0);
}

TEST_CASE("multi-domain storage is indexed across domains") {
  Fixture f(4, 2);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> pos(0.0, 80.0);
  for (int i = 0; i < 200; ++i) {
    const int domain = static_cast<int>(rng() % 2);
    f.rm.push_agent(f.rm.make_agent(domain, {pos(rng), pos(rng), pos(rng)}, 10.0),
                    domain);
  }
  REQUIRE(f.rm.domain_size(0) + f.rm.domain_size(1) == 200);
  REQUIRE(f.rm.domain_size(0) > 0);
  REQUIRE(f.rm.domain_size(1) > 0);

  UniformGrid grid(f.rm, f.pool);
  BruteForceEnvironment oracle(f.rm);
  grid.update();
  oracle.update();
  CHECK(grid.total_agents_indexed() == 200);
  f.rm.for_each_agent([&](Agent&, AgentHandle h) {
    REQUIRE(neighbor_uids(grid, f.rm, h, grid.box_length()) ==
            neighbor_uids(oracle, f.rm, h, grid.box_length()));
  });
}
