#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <chrono>
#include <random>
#include <thread>
#include <vector>

#include "absim/block_schedule.hpp"
#include "absim/topology.hpp"
#include "absim/worker_pool.hpp"
#include "doctest.h"

using namespace absim;

TEST_CASE("logical topology overrides") {
  const auto t1 = detect_topology(4, 1);
  CHECK(t1.domain_count() == 1);
  CHECK(t1.total_threads() == 4);
  CHECK(t1.domains[0].threads == 4);
  CHECK(t1.source == TopologySource::kLogical);

  const auto t2 = detect_topology(4, 2);
  CHECK(t2.domain_count() == 2);
  CHECK(t2.domains[0].threads == 2);
  CHECK(t2.domains[1].threads == 2);
  // Workers are numbered domain-major.
  CHECK(t2.worker_domain(0) == 0);
  CHECK(t2.worker_domain(1) == 0);
  CHECK(t2.worker_domain(2) == 1);
  CHECK(t2.worker_domain(3) == 1);

  // Uneven split: residue threads go to the leading domains.
  const auto t3 = detect_topology(5, 2);
  CHECK(t3.total_threads() == 5);
  CHECK(t3.domains[0].threads + t3.domains[1].threads == 5);
}

TEST_CASE("detection always yields a usable layout") {
  const auto t = detect_topology(0, 0);
  CHECK(t.domain_count() >= 1);
  CHECK(t.total_threads() >= 1);
  int sum = 0;
  for (const auto& d : t.domains) sum += d.threads;
  CHECK(sum == t.total_threads());
  CHECK_FALSE(t.describe().empty());
}

TEST_CASE("domain override larger than the thread count is rejected") {
  CHECK_THROWS_AS(detect_topology(2, 4), std::invalid_argument);
}

TEST_CASE("even chunks cover the range without overlap") {
  for (std::size_t n : {0ul, 1ul, 7ul, 100ul, 1001ul}) {
    for (int parts : {1, 2, 3, 8}) {
      std::size_t covered = 0;
      std::size_t prev_end = 0;
      for (int p = 0; p < parts; ++p) {
        auto [lo, hi] = WorkerPool::even_chunk(n, p, parts);
        CHECK(lo == prev_end);
        CHECK(lo <= hi);
        covered += hi - lo;
        prev_end = hi;
      }
      CHECK(covered == n);
      CHECK(prev_end == n);
    }
  }
}

TEST_CASE("parallel_for visits every index once") {
  WorkerPool pool(detect_topology(4, 2));
  std::vector<std::atomic<int>> hits(10000);
  pool.parallel_for(hits.size(), [&](std::size_t lo, std::size_t hi,
                                     WorkerContext&) {
    for (std::size_t i = lo; i < hi; ++i) hits[i].fetch_add(1);
  });
  for (auto& h : hits) REQUIRE(h.load() == 1);
}

TEST_CASE("exceptions from a region surface on the calling thread") {
  WorkerPool pool(detect_topology(4, 1));
  CHECK_THROWS_WITH_AS(pool.run([](WorkerContext& ctx) {
                         if (ctx.worker_id == 2) {
                           throw std::runtime_error("worker 2 broke");
                         }
                       }),
                       "worker 2 broke", std::runtime_error);
  // The pool stays usable afterwards.
  std::atomic<int> ran{0};
  pool.run([&](WorkerContext&) { ran.fetch_add(1); });
  CHECK(ran.load() == 4);
}

TEST_CASE("single worker visits blocks in sequence order") {
  WorkerPool pool(detect_topology(1, 1));
  std::vector<std::uint32_t> starts;
  StealStats stats;
  for_each_block_stealing(
      pool, {100}, 8,
      [&](const BlockRef& b, WorkerContext&) {
        REQUIRE(b.domain == 0);
        starts.push_back(b.begin);
      },
      nullptr, &stats);
  REQUIRE(starts.size() == 13);  // ceil(100 / 8)
  for (std::size_t i = 0; i < starts.size(); ++i) {
    CHECK(starts[i] == i * 8);
  }
  CHECK(stats.owned == 13);
  CHECK(stats.same_domain == 0);
  CHECK(stats.cross_domain == 0);
}

TEST_CASE("an empty domain's workers steal across domains") {
  WorkerPool pool(detect_topology(4, 2));
  std::vector<std::atomic<int>> counter(1000);
  std::vector<ClaimRecord> log;
  StealStats stats;

  // All agents on domain 0; domain 1's two workers have nothing of their
  // own. Each visit is slowed so the idle workers reliably win claims.
  for_each_block_stealing(
      pool, {1000, 0}, 16,
      [&](const BlockRef& b, WorkerContext&) {
        std::this_thread::sleep_for(std::chrono::microseconds(200));
        for (std::uint32_t i = b.begin; i < b.end; ++i) {
          counter[i].fetch_add(1);
        }
      },
      &log, &stats);

  for (auto& c : counter) REQUIRE(c.load() == 1);
  CHECK(stats.cross_domain > 0);
  CHECK(stats.owned + stats.same_domain + stats.cross_domain == 63);
  CHECK(audit_claim_log(log, {1000, 0}, 16, pool.topology()) == "");
}

TEST_CASE("one slow block never stalls the rest") {
  WorkerPool pool(detect_topology(4, 2));
  std::vector<std::atomic<int>> counter(2000);
  std::vector<ClaimRecord> log;

  for_each_block_stealing(
      pool, {1000, 1000}, 64,
      [&](const BlockRef& b, WorkerContext&) {
        if (b.domain == 0 && b.begin == 0) {
          std::this_thread::sleep_for(std::chrono::milliseconds(30));
        }
        for (std::uint32_t i = b.begin; i < b.end; ++i) {
          counter[b.domain * 1000 + i].fetch_add(1);
        }
      },
      &log);

  for (auto& c : counter) REQUIRE(c.load() == 1);
  CHECK(audit_claim_log(log, {1000, 1000}, 64, pool.topology()) == "");
}

TEST_CASE("randomized loads are processed exactly once") {
  std::mt19937_64 rng(51);
  for (int round = 0; round < 50; ++round) {
    const int threads = 2 + static_cast<int>(rng() % 7);          // 2..8
    const int domains = 1 + static_cast<int>(rng() % 3);          // 1..3
    if (domains > threads) continue;
    WorkerPool pool(detect_topology(threads, domains));

    std::vector<std::uint32_t> sizes(domains);
    std::uint64_t total = 0;
    for (auto& s : sizes) {
      s = static_cast<std::uint32_t>(rng() % 3000);  // zeros included
      total += s;
    }
    const std::uint32_t block = 1 + static_cast<std::uint32_t>(rng() % 300);

    std::vector<std::uint64_t> offset(domains + 1, 0);
    for (int d = 0; d < domains; ++d) offset[d + 1] = offset[d] + sizes[d];
    std::vector<std::atomic<int>> counter(total);
    std::vector<ClaimRecord> log;

    for_each_block_stealing(
        pool, sizes, block,
        [&](const BlockRef& b, WorkerContext&) {
          if ((b.begin / block) % 5 == static_cast<std::uint32_t>(round % 5)) {
            std::this_thread::sleep_for(std::chrono::microseconds(100));
          }
          for (std::uint32_t i = b.begin; i < b.end; ++i) {
            counter[offset[b.domain] + i].fetch_add(1);
          }
        },
        &log);

    for (auto& c : counter) REQUIRE(c.load() == 1);
    REQUIRE(audit_claim_log(log, sizes, block, pool.topology()) == "");
  }
}
