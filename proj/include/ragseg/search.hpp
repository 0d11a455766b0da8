#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ragseg/clustered_store.hpp"

namespace ragseg {

struct SearchHit {
  std::uint32_t index;
  /// Larger is better for every metric; L2 reports the negated squared distance.
  double score;
  float mask_score;

  bool operator==(const SearchHit&) const = default;
};

/// Exact top-k scan over a ClusteredStore.
///
/// Scores are exact: products of floats are accumulated in double. A float
/// GEMM is used only to shortlist centroids that can still reach the top k
/// given its rounding error, so a query's hits never depend on what else is
/// in its batch. Hits are ordered by descending score, ties by ascending index.
///
/// The index keeps a pointer to the store, which must outlive it.
class FlatIndex {
 public:
  explicit FlatIndex(const ClusteredStore& store);
  /// Searches `store` under a metric other than its own tag. Cosine still
  /// requires a normalized store.
  FlatIndex(const ClusteredStore& store, SimilarityMetric metric);

  const ClusteredStore& store() const noexcept { return *store_; }
  SimilarityMetric metric() const noexcept { return metric_; }
  std::size_t dim() const noexcept { return store_->dim(); }
  std::size_t size() const noexcept { return store_->size(); }

  std::vector<SearchHit> search(std::span<const float> query, std::size_t k) const;

  /// `queries` is a row-major T x D matrix. Result i belongs to row i.
  std::vector<std::vector<SearchHit>> search_batch(std::span<const float> queries, std::size_t k,
                                                   std::size_t threads = 1) const;

 private:
  void search_block(const float* queries, std::size_t count, std::size_t k,
                    std::vector<std::vector<SearchHit>>& out, std::size_t out_offset) const;

  const ClusteredStore* store_;
  SimilarityMetric metric_;
  std::vector<float> norms2_;
  double max_norm_ = 0.0;
};

std::vector<SearchHit> search_topk(const ClusteredStore& store, std::span<const float> query, std::size_t k);

std::vector<std::vector<SearchHit>> search_batch(const ClusteredStore& store, std::span<const float> queries,
                                                 std::size_t k, std::size_t threads = 1);

}  // namespace ragseg
