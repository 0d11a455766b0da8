#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "ragseg/clustered_store.hpp"
#include "ragseg/map2d.hpp"
#include "ragseg/tensor_io.hpp"

namespace ragseg {

/// One patch token: its feature vector and the mean ground-truth mask value
/// over the patch.
struct VectorMaskPair {
  std::span<const float> vector;
  float mask_score;
};

/// Uncompressed database of vector-mask pairs, stored as an N x D matrix plus
/// N mask scores. Pairs are ordered image-major, then row-major by token.
class RawDatabase {
 public:
  RawDatabase(std::size_t dim, std::vector<float> vectors, std::vector<float> mask_scores,
              std::size_t source_count);

  std::size_t size() const noexcept { return mask_scores_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t source_count() const noexcept { return source_count_; }

  VectorMaskPair pair(std::size_t i) const noexcept {
    return {std::span<const float>(vectors_).subspan(i * dim_, dim_), mask_scores_[i]};
  }
  std::span<const float> vectors() const noexcept { return vectors_; }
  std::span<const float> mask_scores() const noexcept { return mask_scores_; }

 private:
  std::size_t dim_;
  std::vector<float> vectors_;
  std::vector<float> mask_scores_;
  std::size_t source_count_;
};

/// Average-pools an H x W mask into a g x g token grid. H and W must be
/// divisible by g and every value must lie in [0, 1].
Map2d pool_mask(const Map2d& mask, std::size_t grid_side);

/// Builds the raw database from per-image T x D feature tensors and length-T
/// token masks. T must be a perfect square (class tokens are never accepted).
RawDatabase ingest(std::span<const Tensor> features, std::span<const std::vector<float>> token_masks);

/// Concatenates two stores (a's entries first). No deduplication.
ClusteredStore merge(const ClusteredStore& a, const ClusteredStore& b);

struct ScoreHistogram {
  std::array<double, 11> edges{};
  std::array<std::size_t, 10> counts{};
};

/// Ten uniform bins over [0, 1]; bin i holds [i/10, (i+1)/10), the last bin is closed.
ScoreHistogram histogram(const ClusteredStore& store);

/// CSV with header `bin_lo,bin_hi,count`.
void write_histogram_csv(std::ostream& out, const ScoreHistogram& hist);

}  // namespace ragseg
