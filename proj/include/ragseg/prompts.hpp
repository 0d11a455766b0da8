#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ragseg/map2d.hpp"
#include "ragseg/pseudolabel.hpp"

namespace ragseg {

inline constexpr std::size_t kMaskPromptSide = 256;

struct PromptPoint {
  std::size_t x;  // column
  std::size_t y;  // row
  int label;      // 1 positive, 0 negative
  double confidence;

  bool operator==(const PromptPoint&) const = default;
};

struct PromptConfig {
  double t_pos = 0.95;
  double t_neg = 0.005;
  double mask_tau = 0.3;
  std::size_t max_points = 10;  // per polarity

  /// Throws std::invalid_argument unless 0 <= t_neg < t_pos <= 1 and 0 < mask_tau < 1.
  void validate() const;
};

struct PromptSet {
  Map2d mask_prompt;  // kMaskPromptSide x kMaskPromptSide, values in [0, 1]
  std::vector<PromptPoint> points;  // positives first, then negatives
  std::size_t source_height = 0;
  std::size_t source_width = 0;

  bool operator==(const PromptSet&) const = default;
};

/// Minimum pixel distance between any two prompt points.
double min_point_spacing(std::size_t height, std::size_t width);

/// Mask prompt: values below mask_tau zeroed, then area-resampled to 256x256.
/// Points: pixels >= t_pos (positives, highest first) and <= t_neg (negatives,
/// lowest first), ties in row-major order, picked greedily while keeping the
/// spacing, up to max_points each.
PromptSet extract_prompts(const Map2d& pseudo_label, const PromptConfig& cfg = {});
PromptSet extract_prompts(const PseudoLabel& pseudo_label, const PromptConfig& cfg = {});

/// Writes the JSON to `json_path` and the mask prompt as an RSGT f32 256x256
/// tensor next to it (`<stem>_mask.rsgt`, referenced by file name).
void write_prompts(const PromptSet& prompts, const std::filesystem::path& json_path);

/// The exact bytes write_prompts puts in the JSON file.
std::string prompts_json(const PromptSet& prompts, const std::string& mask_prompt_file);

PromptSet read_prompts(const std::filesystem::path& json_path);

}  // namespace ragseg
