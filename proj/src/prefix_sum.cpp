#include "absim/prefix_sum.hpp"

#include <vector>

namespace absim {

namespace {
constexpr std::size_t kSerialCutoff = 4096;
}

std::uint64_t exclusive_prefix_sum_serial(std::span<std::uint64_t> values) {
  std::uint64_t acc = 0;
  for (auto& v : values) {
    std::uint64_t next = acc + v;
    v = acc;
    acc = next;
  }
  return acc;
}

std::uint64_t exclusive_prefix_sum(WorkerPool& pool,
                                   std::span<std::uint64_t> values) {
  const int workers = pool.worker_count();
  if (values.size() < kSerialCutoff || workers == 1) {
    return exclusive_prefix_sum_serial(values);
  }

  std::vector<std::uint64_t> chunk_total(workers, 0);
  pool.run([&](WorkerContext& ctx) {
    auto [lo, hi] =
        WorkerPool::even_chunk(values.size(), ctx.worker_id, workers);
    std::uint64_t sum = 0;
    for (std::size_t i = lo; i < hi; ++i) sum += values[i];
    chunk_total[ctx.worker_id] = sum;

    ctx.barrier();
    if (ctx.worker_id == 0) {
      exclusive_prefix_sum_serial(chunk_total);
    }
    ctx.barrier();

    std::uint64_t acc = chunk_total[ctx.worker_id];
    for (std::size_t i = lo; i < hi; ++i) {
      std::uint64_t next = acc + values[i];
      values[i] = acc;
      acc = next;
    }
    if (ctx.worker_id == workers - 1) chunk_total[ctx.worker_id] = acc;
  });
  return chunk_total[workers - 1];
}

}  // namespace absim
