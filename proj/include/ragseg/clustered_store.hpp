#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ragseg {

/// Similarity function used for retrieval. Numeric values are the RSDB metric codes.
enum class SimilarityMetric : std::uint8_t {
  inner_product = 0,
  cosine = 1,
  l2 = 2,
};

std::string_view to_string(SimilarityMetric metric) noexcept;

/// Accepts "ip", "inner_product", "cosine", "cos", "l2". Throws std::invalid_argument.
SimilarityMetric parse_metric(std::string_view text);

/// Unit-norm tolerance required of every row of a cosine store.
inline constexpr double kUnitNormTolerance = 1e-4;

/// KMeans-compressed dictionary: K centroids of dimension D, each carrying a
/// mask score in [0, 1]. Immutable after construction.
class ClusteredStore {
 public:
  /// Validates: K >= 1, D >= 1, finite values, scores in [0, 1],
  /// and unit-norm rows plus the normalized flag when metric is cosine.
  ClusteredStore(std::size_t dim, std::vector<float> centroids, std::vector<float> mask_scores,
                 SimilarityMetric metric, bool normalized);

  std::size_t size() const noexcept { return mask_scores_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  SimilarityMetric metric() const noexcept { return metric_; }
  bool normalized() const noexcept { return normalized_; }

  std::span<const float> centroids() const noexcept { return centroids_; }
  std::span<const float> centroid(std::size_t i) const noexcept {
    return std::span<const float>(centroids_).subspan(i * dim_, dim_);
  }
  std::span<const float> mask_scores() const noexcept { return mask_scores_; }

  bool operator==(const ClusteredStore&) const = default;

 private:
  std::size_t dim_;
  std::vector<float> centroids_;
  std::vector<float> mask_scores_;
  SimilarityMetric metric_;
  bool normalized_;
};

}  // namespace ragseg
