#include "ragseg/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "ragseg/error.hpp"
#include "ragseg/kmeans.hpp"
#include "ragseg/search.hpp"
#include "ragseg/tensor_io.hpp"

namespace ragseg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

void BenchConfig::validate() const {
  if (tokens_per_query == 0) throw std::invalid_argument("bench: tokens_per_query must be at least 1");
  if (num_queries == 0) throw std::invalid_argument("bench: num_queries must be at least 1");
  if (warmup_queries >= num_queries) throw std::invalid_argument("bench: warm-up must be smaller than num_queries");
  if (k_values.empty()) throw std::invalid_argument("bench: no K values");
  if (topk == 0) throw std::invalid_argument("bench: topk must be at least 1");
  if (kmeans_iters == 0) throw std::invalid_argument("bench: kmeans_iters must be at least 1");
  for (std::size_t k : k_values) {
    if (k == 0) throw std::invalid_argument("bench: K must be positive");
    if (topk > k) throw std::invalid_argument(fmt::format("bench: topk {} exceeds K {}", topk, k));
  }
}

RawDatabase synthetic_database(std::size_t n, std::size_t dim, std::size_t centers, double spread,
                               std::uint64_t seed) {
  if (n == 0 || dim == 0 || centers == 0) throw std::invalid_argument("synthetic database: sizes must be positive");
  if (!(spread >= 0.0)) throw std::invalid_argument("synthetic database: negative spread");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, centers - 1);

  std::vector<double> centres(centers * dim);
  for (double& c : centres) c = normal(rng);
  std::vector<float> vectors(n * dim);
  std::vector<float> masks(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = pick(rng);
    for (std::size_t d = 0; d < dim; ++d) {
      vectors[i * dim + d] = static_cast<float>(centres[c * dim + d] + spread * normal(rng));
    }
    masks[i] = static_cast<float>(unit(rng));
  }
  return RawDatabase(dim, std::move(vectors), std::move(masks), 1);
}

double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("nearest_rank: empty sample");
  if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("nearest_rank: p outside (0,100]");
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size()) / 100.0));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

BenchReport run_bench(const RawDatabase& db, const BenchConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> ks = cfg.k_values;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.back() > db.size()) {
    throw DataError(fmt::format("k exceeds database size ({} > {})", ks.back(), db.size()));
  }

  const std::size_t dim = db.dim();
  const std::size_t total_queries = cfg.warmup_queries + cfg.num_queries;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, db.size() - 1);
  std::vector<std::uint32_t> token_ids(total_queries * cfg.tokens_per_query);
  for (auto& id : token_ids) id = static_cast<std::uint32_t>(pick(rng));

  std::vector<float> query(cfg.tokens_per_query * dim);
  const auto load_query = [&](std::size_t q) {
    for (std::size_t t = 0; t < cfg.tokens_per_query; ++t) {
      const auto src = db.pair(token_ids[q * cfg.tokens_per_query + t]).vector;
      std::copy(src.begin(), src.end(), query.begin() + static_cast<std::ptrdiff_t>(t * dim));
    }
  };

  BenchReport report;
  for (std::size_t k : ks) {
    KMeansConfig kc;
    kc.k = k;
    kc.max_iters = cfg.kmeans_iters;
    kc.seed = cfg.seed;
    kc.metric = cfg.metric;
    kc.threads = 1;
    TimedKMeans timed = timed_cluster(db, kc);
    const ClusteredStore& store = timed.result.store;
    const FlatIndex index(store);

    BenchRow row;
    row.k = k;
    row.cluster_time_s = timed.seconds;
    row.kmeans_iterations = timed.result.iterations_run;
    row.store_bytes = encode_store(store).size();

    std::size_t sink = 0;
    for (std::size_t q = 0; q < cfg.warmup_queries; ++q) {
      load_query(q);
      sink += index.search_batch(query, cfg.topk, 1).size();
    }
    std::vector<double> latencies(cfg.num_queries);
    for (std::size_t q = 0; q < cfg.num_queries; ++q) {
      load_query(cfg.warmup_queries + q);
      const auto start = Clock::now();
      sink += index.search_batch(query, cfg.topk, 1).size();
      latencies[q] = seconds_since(start);
    }
    if (sink != total_queries * cfg.tokens_per_query) throw Error("bench: incomplete search results");

    double total = 0.0;
    for (double v : latencies) total += v;
    row.mean_query_s = total / static_cast<double>(cfg.num_queries);
    std::sort(latencies.begin(), latencies.end());
    row.p50_s = nearest_rank(latencies, 50.0);
    row.p95_s = nearest_rank(latencies, 95.0);

    if (cfg.throughput_workers > 0) {
      double busy = 0.0;
      for (std::size_t q = 0; q < cfg.num_queries; ++q) {
        load_query(cfg.warmup_queries + q);
        const auto start = Clock::now();
        index.search_batch(query, cfg.topk, cfg.throughput_workers);
        busy += seconds_since(start);
      }
      row.throughput_qps = static_cast<double>(cfg.num_queries) / busy;
    }
    report.rows.push_back(row);
  }
  return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << "k,cluster_time_s,mean_query_s,p50_s,p95_s,store_bytes\n";
  for (const BenchRow& r : report.rows) {
    out << fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{}\n", r.k, r.cluster_time_s, r.mean_query_s, r.p50_s,
                       r.p95_s, r.store_bytes);
  }
}

}  // namespace ragseg
