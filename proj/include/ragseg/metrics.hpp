#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "ragseg/map2d.hpp"

namespace ragseg {

inline constexpr double kStructureAlpha = 0.5;
inline constexpr std::size_t kEnhancedThresholds = 256;
inline constexpr double kGtBinarizeThreshold = 0.5;

/// GT pixels >= 0.5 become 1, the rest 0.
Map2d binarize_gt(const Map2d& gt);

/// Mean absolute difference. Both maps must share a shape and lie in [0, 1].
double mae(const Map2d& pred, const Map2d& gt);

/// Structure measure; `gt` is binarized at 0.5.
double s_measure(const Map2d& pred, const Map2d& gt, double alpha = kStructureAlpha);

/// Mean enhanced-alignment measure over binarization thresholds
/// (i + 0.5) / 256, i = 0..255; a pixel is foreground when pred >= threshold.
double e_measure(const Map2d& pred, const Map2d& gt);

/// Weighted F-measure with beta^2 = 1. An empty GT scores 0.
double weighted_f(const Map2d& pred, const Map2d& gt);

/// Euclidean distance from every pixel to the nearest foreground pixel of
/// `mask` together with that pixel's row-major index. Foreground pixels map
/// to themselves; ties resolve to the smallest index. `mask` must be non-empty
/// in foreground.
struct DistanceTransform {
  std::vector<double> distance;
  std::vector<std::size_t> nearest;
};
DistanceTransform distance_transform(const Map2d& mask);

struct ImageScores {
  std::string id;
  double s_alpha = 0.0;
  double e_xi = 0.0;
  double f_beta_w = 0.0;
  double mae = 0.0;
};

struct MetricsReport {
  std::vector<ImageScores> per_image;  // sorted by id
  ImageScores aggregate;               // column means, id "mean"
};

/// All four scores; `pred` is bilinearly resized to the GT shape if needed.
ImageScores evaluate(std::string id, const Map2d& pred, const Map2d& gt);

/// Loads a prediction or GT map: RSGT (f32 as is, u8 divided by 255; rank 2,
/// or rank 3 with a unit channel) or 8-bit PGM.
Map2d load_map(const std::filesystem::path& path);

/// Pairs `.rsgt`/`.pgm` files by stem. Every stem must exist on both sides.
MetricsReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                           std::size_t threads = 1);

std::string report_json(const MetricsReport& report);

/// `id,s_alpha,e_xi,f_beta_w,mae` rows, then a `mean` row.
void write_report_csv(std::ostream& out, const MetricsReport& report);

}  // namespace ragseg
