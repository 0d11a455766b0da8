#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "ragseg/clustered_store.hpp"
#include "ragseg/store.hpp"

namespace ragseg {

struct BenchConfig {
  std::size_t tokens_per_query = 3136;  // (784 / 14)^2
  std::size_t num_queries = 1000;
  std::size_t warmup_queries = 50;
  std::vector<std::size_t> k_values;
  std::size_t topk = 1;
  SimilarityMetric metric = SimilarityMetric::inner_product;
  std::uint64_t seed = 0;
  std::size_t kmeans_iters = 200;
  /// 0 disables the multi-worker throughput pass.
  std::size_t throughput_workers = 0;

  /// Throws std::invalid_argument on an unusable configuration.
  void validate() const;
};

struct BenchRow {
  std::size_t k = 0;
  double cluster_time_s = 0.0;
  double mean_query_s = 0.0;
  double p50_s = 0.0;
  double p95_s = 0.0;
  std::uint64_t store_bytes = 0;
  std::size_t kmeans_iterations = 0;
  double throughput_qps = 0.0;  // 0 when the throughput pass is disabled
};

struct BenchReport {
  std::vector<BenchRow> rows;  // ascending k
};

/// `n` vectors drawn around `centers` Gaussian blobs (unit-variance centres,
/// per-coordinate noise `spread`), each with a uniform mask score.
RawDatabase synthetic_database(std::size_t n, std::size_t dim, std::size_t centers, double spread,
                               std::uint64_t seed);

/// Nearest-rank percentile of ascending `sorted`: sorted[ceil(p n / 100) - 1].
double nearest_rank(std::span<const double> sorted, double p);

/// For each K: timed clustering, store serialization, then warm-up and timed
/// single-worker searches of `tokens_per_query` database tokens per query.
/// Query tokens are drawn once from `seed` and shared by every K.
BenchReport run_bench(const RawDatabase& db, const BenchConfig& cfg);

/// `k,cluster_time_s,mean_query_s,p50_s,p95_s,store_bytes`
void write_bench_csv(std::ostream& out, const BenchReport& report);

}  // namespace ragseg
