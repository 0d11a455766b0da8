#include "ragseg/pseudolabel.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "ragseg/error.hpp"

namespace ragseg {

QueryGrid::QueryGrid(std::vector<float> tokens, std::size_t dim, std::size_t grid_side, std::size_t height,
                     std::size_t width)
    : tokens_(std::move(tokens)), dim_(dim), grid_side_(grid_side), height_(height), width_(width) {
  if (grid_side_ == 0) throw DataError("query grid: side must be positive");
  if (dim_ == 0) throw DataError("query grid: dim must be positive");
  if (tokens_.size() != grid_side_ * grid_side_ * dim_) {
    throw DataError(fmt::format("query grid: expected {}x{} tokens of dim {}, got {} values", grid_side_,
                                grid_side_, dim_, tokens_.size()));
  }
  if (height_ != width_ || height_ != grid_side_ * kPatchSize) {
    throw DataError(fmt::format("query grid: resolution {}x{} must be square with side {} = {} x {}", height_,
                                width_, grid_side_ * kPatchSize, grid_side_, kPatchSize));
  }
}

ThresholdStrategy ThresholdStrategy::step(int n) {
  if (n == 0) return none();
  if (n < 1 || n > 9) throw std::invalid_argument(fmt::format("threshold step T{} outside T0..T9", n));
  return ThresholdStrategy(Kind::fixed, n / 10.0);
}

ThresholdStrategy ThresholdStrategy::fixed(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument(fmt::format("threshold {} outside (0,1)", tau));
  return ThresholdStrategy(Kind::fixed, tau);
}

ThresholdStrategy ThresholdStrategy::parse(std::string_view text) {
  if (text == "none" || text == "T0") return none();
  if (text == "TN" || text == "normalized" || text == "norm") return normalized();
  if (text.size() == 2 && text[0] == 'T' && text[1] >= '1' && text[1] <= '9') return step(text[1] - '0');
  double tau = 0.0;
  const char* end = text.data() + text.size();
  if (auto [ptr, ec] = std::from_chars(text.data(), end, tau); ec == std::errc() && ptr == end) return fixed(tau);
  throw std::invalid_argument(fmt::format("unknown threshold strategy '{}'", text));
}

std::string ThresholdStrategy::name() const {
  switch (kind_) {
    case Kind::none:
      return "T0";
    case Kind::normalized:
      return "TN";
    case Kind::fixed:
      break;
  }
  const double n = tau_ * 10.0;
  if (std::abs(n - std::round(n)) < 1e-12) return fmt::format("T{}", static_cast<int>(std::round(n)));
  return fmt::format("{}", tau_);
}

Map2d upsample(const Map2d& grid_map, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw DataError("upsample: zero target dimension");
  return resize_bilinear(grid_map, height, width);
}

PseudoLabel generate(const FlatIndex& index, const QueryGrid& grid, std::size_t topk, std::size_t threads) {
  if (topk == 0) throw DataError("generate: top-k must be at least 1");
  if (grid.dim() != index.dim()) {
    throw DataError(fmt::format("generate: token dim {} != store dim {}", grid.dim(), index.dim()));
  }
  const auto hits = index.search_batch(grid.tokens(), topk, threads);
  const std::size_t g = grid.grid_side();
  Map2d tokens(g, g);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    double acc = 0.0;
    for (const SearchHit& h : hits[i]) acc += h.mask_score;
    tokens.values()[i] = acc / static_cast<double>(hits[i].size());
  }
  Map2d values = upsample(tokens, grid.height(), grid.width());
  return {std::move(values), std::move(tokens)};
}

PseudoLabel generate(const ClusteredStore& store, const QueryGrid& grid, std::size_t topk, SimilarityMetric metric) {
  return generate(FlatIndex(store, metric), grid, topk);
}

Map2d apply_threshold(const Map2d& map, const ThresholdStrategy& strategy) {
  Map2d out = map;
  switch (strategy.kind()) {
    case ThresholdStrategy::Kind::none:
      break;
    case ThresholdStrategy::Kind::fixed:
      for (double& v : out.values()) {
        if (v < strategy.tau()) v = 0.0;
      }
      break;
    case ThresholdStrategy::Kind::normalized: {
      if (out.empty()) break;
      const double lo = map.min();
      const double hi = map.max();
      const double denom = hi - lo + kNormalizeEpsilon;
      for (double& v : out.values()) v = (v - lo) / denom;
      break;
    }
  }
  return out;
}

PseudoLabel apply_threshold(const PseudoLabel& label, const ThresholdStrategy& strategy) {
  return {apply_threshold(label.values, strategy), label.grid};
}

}  // namespace ragseg
