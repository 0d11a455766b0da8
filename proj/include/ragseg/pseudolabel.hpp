#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragseg/clustered_store.hpp"
#include "ragseg/map2d.hpp"
#include "ragseg/search.hpp"

namespace ragseg {

/// Side length in pixels of one ViT patch token.
inline constexpr std::size_t kPatchSize = 14;

/// g x g query tokens (row-major token order) extracted from a square image of
/// side g * kPatchSize.
class QueryGrid {
 public:
  QueryGrid(std::vector<float> tokens, std::size_t dim, std::size_t grid_side, std::size_t height,
            std::size_t width);

  std::size_t grid_side() const noexcept { return grid_side_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::span<const float> tokens() const noexcept { return tokens_; }

 private:
  std::vector<float> tokens_;
  std::size_t dim_;
  std::size_t grid_side_;
  std::size_t height_;
  std::size_t width_;
};

/// Retrieval output: the g x g token map and its upsampled H x W version.
struct PseudoLabel {
  Map2d values;
  Map2d grid;
};

/// T_0 (none), T_n (fixed tau = n / 10, sub-threshold values zeroed, the rest
/// kept as-is) and T_N (min-max normalization with epsilon 1e-9).
class ThresholdStrategy {
 public:
  enum class Kind { none, fixed, normalized };

  static ThresholdStrategy none() { return ThresholdStrategy(Kind::none, 0.0); }
  /// T_n for n in 1..9.
  static ThresholdStrategy step(int n);
  /// Arbitrary fixed threshold in (0, 1).
  static ThresholdStrategy fixed(double tau);
  static ThresholdStrategy normalized() { return ThresholdStrategy(Kind::normalized, 0.0); }

  /// "T0"/"none", "T1".."T9", "TN"/"normalized", or a decimal in (0, 1).
  static ThresholdStrategy parse(std::string_view text);

  Kind kind() const noexcept { return kind_; }
  double tau() const noexcept { return tau_; }
  std::string name() const;

 private:
  ThresholdStrategy(Kind kind, double tau) : kind_(kind), tau_(tau) {}

  Kind kind_;
  double tau_;
};

inline constexpr double kNormalizeEpsilon = 1e-9;

/// Token value = mean mask score of the top-k hits; then bilinear upsampling
/// to the grid's source resolution.
PseudoLabel generate(const FlatIndex& index, const QueryGrid& grid, std::size_t topk = 1, std::size_t threads = 1);
PseudoLabel generate(const ClusteredStore& store, const QueryGrid& grid, std::size_t topk, SimilarityMetric metric);

/// Bilinear upsampling with half-pixel centres (see resize_bilinear).
Map2d upsample(const Map2d& grid_map, std::size_t height, std::size_t width);

Map2d apply_threshold(const Map2d& map, const ThresholdStrategy& strategy);

/// Thresholds the full-resolution values; the token grid is left as retrieved.
PseudoLabel apply_threshold(const PseudoLabel& label, const ThresholdStrategy& strategy);

}  // namespace ragseg
