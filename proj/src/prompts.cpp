#include "ragseg/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "ragseg/error.hpp"
#include "ragseg/tensor_io.hpp"

namespace ragseg {

namespace {

struct Candidate {
  double value;
  std::size_t pos;  // row-major index
};

// Appends up to `max_points` points of `label` to `points`, each at least
// `spacing` from every point already there, whatever its polarity.
void pick_points(const Map2d& map, std::vector<Candidate> candidates, bool highest_first, int label,
                 std::size_t max_points, double spacing, std::vector<PromptPoint>& points) {
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.value != b.value) return highest_first ? a.value > b.value : a.value < b.value;
    return a.pos < b.pos;
  });
  const double spacing2 = spacing * spacing;
  std::size_t picked = 0;
  for (const Candidate& c : candidates) {
    if (picked >= max_points) break;
    const std::size_t y = c.pos / map.cols();
    const std::size_t x = c.pos % map.cols();
    const bool far_enough = std::all_of(points.begin(), points.end(), [&](const PromptPoint& p) {
      const double dx = static_cast<double>(x) - static_cast<double>(p.x);
      const double dy = static_cast<double>(y) - static_cast<double>(p.y);
      return dx * dx + dy * dy >= spacing2;
    });
    if (far_enough) {
      points.push_back({x, y, label, c.value});
      ++picked;
    }
  }
}

}  // namespace

void PromptConfig::validate() const {
  if (!(t_neg >= 0.0 && t_neg < t_pos && t_pos <= 1.0)) {
    throw std::invalid_argument(fmt::format("prompt thresholds must satisfy 0 <= t_neg < t_pos <= 1 (got {}, {})",
                                            t_neg, t_pos));
  }
  if (!(mask_tau > 0.0 && mask_tau < 1.0)) {
    throw std::invalid_argument(fmt::format("mask threshold {} outside (0,1)", mask_tau));
  }
}

double min_point_spacing(std::size_t height, std::size_t width) {
  return static_cast<double>(std::max(height, width)) / 16.0;
}

PromptSet extract_prompts(const Map2d& pseudo_label, const PromptConfig& cfg) {
  cfg.validate();
  if (pseudo_label.empty()) throw DataError("extract_prompts: empty pseudo-label");
  for (double v : pseudo_label.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("extract_prompts: pseudo-label value outside [0,1]");
  }

  PromptSet out;
  out.source_height = pseudo_label.rows();
  out.source_width = pseudo_label.cols();

  // Stored at f32 precision, the precision of the exchange file.
  out.mask_prompt = resize_area(apply_threshold(pseudo_label, ThresholdStrategy::fixed(cfg.mask_tau)),
                                kMaskPromptSide, kMaskPromptSide);
  for (double& v : out.mask_prompt.values()) v = std::clamp(static_cast<double>(static_cast<float>(v)), 0.0, 1.0);

  std::vector<Candidate> positives;
  std::vector<Candidate> negatives;
  const auto values = pseudo_label.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= cfg.t_pos) positives.push_back({values[i], i});
    if (values[i] <= cfg.t_neg) negatives.push_back({values[i], i});
  }
  const double spacing = min_point_spacing(out.source_height, out.source_width);
  pick_points(pseudo_label, std::move(positives), true, 1, cfg.max_points, spacing, out.points);
  pick_points(pseudo_label, std::move(negatives), false, 0, cfg.max_points, spacing, out.points);
  return out;
}

PromptSet extract_prompts(const PseudoLabel& pseudo_label, const PromptConfig& cfg) {
  return extract_prompts(pseudo_label.values, cfg);
}

std::string prompts_json(const PromptSet& prompts, const std::string& mask_prompt_file) {
  nlohmann::ordered_json doc;
  doc["source_resolution"] = {prompts.source_height, prompts.source_width};
  doc["mask_prompt_file"] = mask_prompt_file;
  auto points = nlohmann::ordered_json::array();
  for (const PromptPoint& p : prompts.points) {
    nlohmann::ordered_json item;
    item["x"] = p.x;
    item["y"] = p.y;
    item["label"] = p.label;
    item["confidence"] = p.confidence;
    points.push_back(std::move(item));
  }
  doc["points"] = std::move(points);
  return doc.dump(2) + "\n";
}

void write_prompts(const PromptSet& prompts, const std::filesystem::path& json_path) {
  if (prompts.mask_prompt.rows() != kMaskPromptSide || prompts.mask_prompt.cols() != kMaskPromptSide) {
    throw DataError("write_prompts: mask prompt must be 256x256");
  }
  const std::string mask_name = json_path.stem().string() + "_mask.rsgt";
  const auto mask_path = json_path.parent_path() / mask_name;

  std::vector<float> mask(prompts.mask_prompt.values().begin(), prompts.mask_prompt.values().end());
  write_tensor(mask_path, Tensor::from_f32({kMaskPromptSide, kMaskPromptSide}, std::move(mask)));

  const std::string text = prompts_json(prompts, mask_name);
  write_file(json_path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

PromptSet read_prompts(const std::filesystem::path& json_path) {
  const auto bytes = read_file(json_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data()),
                                reinterpret_cast<const char*>(bytes.data()) + bytes.size());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("prompts JSON '{}': {}", json_path.string(), e.what()));
  }

  PromptSet out;
  try {
    out.source_height = doc.at("source_resolution").at(0).get<std::size_t>();
    out.source_width = doc.at("source_resolution").at(1).get<std::size_t>();
    for (const auto& item : doc.at("points")) {
      out.points.push_back({item.at("x").get<std::size_t>(), item.at("y").get<std::size_t>(),
                            item.at("label").get<int>(), item.at("confidence").get<double>()});
    }
    const auto mask_file = doc.at("mask_prompt_file").get<std::string>();
    const Tensor mask = read_tensor(json_path.parent_path() / mask_file);
    if (mask.rank() != 2 || mask.dims()[0] != kMaskPromptSide || mask.dims()[1] != kMaskPromptSide) {
      throw FormatError("mask prompt tensor must be 256x256");
    }
    const auto v = mask.f32();
    out.mask_prompt = Map2d(kMaskPromptSide, kMaskPromptSide, std::vector<double>(v.begin(), v.end()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("prompts JSON '{}': {}", json_path.string(), e.what()));
  }
  return out;
}

}  // namespace ragseg
