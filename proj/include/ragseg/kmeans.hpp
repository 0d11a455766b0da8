#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ragseg/clustered_store.hpp"
#include "ragseg/store.hpp"

namespace ragseg {

struct KMeansConfig {
  std::size_t k = 4096;
  std::size_t max_iters = 200;
  std::uint64_t seed = 0;
  /// Stop once the largest relative centroid shift drops below this.
  double tol = 1e-6;
  /// Retrieval metric the store is built for. Cosine normalizes the inputs
  /// and keeps centroids on the unit sphere; clustering is always L2.
  SimilarityMetric metric = SimilarityMetric::inner_product;
  /// 0 = resolve from RAGSEG_THREADS / hardware. Output does not depend on it.
  std::size_t threads = 0;
};

struct KMeansResult {
  ClusteredStore store;
  /// Sum of squared L2 distances to the assigned centroid: entry 0 after
  /// seeding, one entry per Lloyd iteration, and a closing entry when the
  /// returned centroids were re-averaged after the last assignment.
  /// The last entry is always the objective of (store, assignments).
  std::vector<double> objective_trace;
  std::size_t iterations_run = 0;
  std::vector<std::uint32_t> assignments;
};

/// Lloyd's KMeans with kmeans++ seeding. Each centroid's mask score is the mean
/// mask score of its members. Deterministic for a fixed (db, cfg), independent
/// of the worker count.
KMeansResult cluster(const RawDatabase& db, const KMeansConfig& cfg);

struct TimedKMeans {
  KMeansResult result;
  double seconds;
};

/// `cluster` measured with a monotonic clock.
TimedKMeans timed_cluster(const RawDatabase& db, const KMeansConfig& cfg);

/// CSV with header `iter,objective`.
void write_objective_csv(std::ostream& out, std::span<const double> trace);

}  // namespace ragseg
