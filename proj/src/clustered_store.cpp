#include "ragseg/clustered_store.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "ragseg/error.hpp"

namespace ragseg {

std::string_view to_string(SimilarityMetric metric) noexcept {
  switch (metric) {
    case SimilarityMetric::inner_product:
      return "inner_product";
    case SimilarityMetric::cosine:
      return "cosine";
    case SimilarityMetric::l2:
      return "l2";
  }
  return "unknown";
}

SimilarityMetric parse_metric(std::string_view text) {
  if (text == "ip" || text == "inner_product" || text == "IP") return SimilarityMetric::inner_product;
  if (text == "cosine" || text == "cos") return SimilarityMetric::cosine;
  if (text == "l2" || text == "L2") return SimilarityMetric::l2;
  throw std::invalid_argument(fmt::format("unknown metric '{}' (expected ip, cosine or l2)", text));
}

ClusteredStore::ClusteredStore(std::size_t dim, std::vector<float> centroids,
                               std::vector<float> mask_scores, SimilarityMetric metric,
                               bool normalized)
    : dim_(dim),
      centroids_(std::move(centroids)),
      mask_scores_(std::move(mask_scores)),
      metric_(metric),
      normalized_(normalized) {
  if (dim_ == 0) throw DataError("store: dimension must be positive");
  if (mask_scores_.empty()) throw DataError("store: K must be at least 1");
  if (centroids_.size() != mask_scores_.size() * dim_) {
    throw DataError("store: centroid matrix does not match K x D");
  }
  if (metric_ != SimilarityMetric::inner_product && metric_ != SimilarityMetric::cosine &&
      metric_ != SimilarityMetric::l2) {
    throw DataError("store: unknown metric code");
  }
  for (std::size_t i = 0; i < mask_scores_.size(); ++i) {
    const float s = mask_scores_[i];
    if (!(s >= 0.0f && s <= 1.0f)) {
      throw DataError(fmt::format("store: mask score {} at entry {} outside [0,1]", s, i));
    }
  }
  for (float v : centroids_) {
    if (!std::isfinite(v)) throw DataError("store: non-finite centroid value");
  }
  if (metric_ == SimilarityMetric::cosine && !normalized_) {
    throw DataError("store: cosine metric requires normalized vectors");
  }
  if (normalized_) {
    for (std::size_t i = 0; i < size(); ++i) {
      double n2 = 0.0;
      for (float v : centroid(i)) n2 += static_cast<double>(v) * v;
      if (std::abs(std::sqrt(n2) - 1.0) > kUnitNormTolerance) {
        throw DataError(fmt::format("store: row {} is flagged normalized but has norm {}", i, std::sqrt(n2)));
      }
    }
  }
}

}  // namespace ragseg
