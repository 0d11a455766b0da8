#include "ragseg/map2d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ragseg/error.hpp"

namespace ragseg {

Map2d::Map2d(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Map2d::Map2d(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw DataError("Map2d: value count does not match rows x cols");
  }
}

double Map2d::min() const {
  if (values_.empty()) throw DataError("Map2d::min on empty map");
  return *std::min_element(values_.begin(), values_.end());
}

double Map2d::max() const {
  if (values_.empty()) throw DataError("Map2d::max on empty map");
  return *std::max_element(values_.begin(), values_.end());
}

double Map2d::mean() const {
  if (values_.empty()) throw DataError("Map2d::mean on empty map");
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double last = static_cast<double>(in - 1);
  for (std::size_t i = 0; i < out; ++i) {
    double u = (static_cast<double>(i) + 0.5) * scale - 0.5;
    u = std::clamp(u, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(u));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, u - static_cast<double>(lo)};
  }
  return taps;
}

// Overlap weights of output cell i over input cells, for a 1-D box filter.
std::vector<std::vector<std::pair<std::size_t, double>>> area_weights(std::size_t in, std::size_t out) {
  std::vector<std::vector<std::pair<std::size_t, double>>> weights(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double start = static_cast<double>(i) * scale;
    const double end = static_cast<double>(i + 1) * scale;
    auto first = static_cast<std::size_t>(std::floor(start));
    auto last = std::min(in, static_cast<std::size_t>(std::ceil(end)));
    for (std::size_t j = first; j < last; ++j) {
      const double overlap =
          std::min(end, static_cast<double>(j + 1)) - std::max(start, static_cast<double>(j));
      if (overlap > 0.0) weights[i].emplace_back(j, overlap / scale);
    }
  }
  return weights;
}

}  // namespace

Map2d resize_bilinear(const Map2d& src, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw DataError("resize_bilinear: target dimensions must be positive");
  if (src.empty()) throw DataError("resize_bilinear: empty source map");

  const auto row_taps = bilinear_taps(src.rows(), rows);
  const auto col_taps = bilinear_taps(src.cols(), cols);
  Map2d out(rows, cols);
  for (std::size_t y = 0; y < rows; ++y) {
    const Tap& ty = row_taps[y];
    for (std::size_t x = 0; x < cols; ++x) {
      const Tap& tx = col_taps[x];
      const double top = src(ty.lo, tx.lo) + (src(ty.lo, tx.hi) - src(ty.lo, tx.lo)) * tx.frac;
      const double bottom = src(ty.hi, tx.lo) + (src(ty.hi, tx.hi) - src(ty.hi, tx.lo)) * tx.frac;
      out(y, x) = top + (bottom - top) * ty.frac;
    }
  }
  return out;
}

Map2d resize_area(const Map2d& src, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw DataError("resize_area: target dimensions must be positive");
  if (src.empty()) throw DataError("resize_area: empty source map");

  const auto row_w = area_weights(src.rows(), rows);
  const auto col_w = area_weights(src.cols(), cols);

  // Columns first into an intermediate src.rows() x cols map, then rows.
  Map2d tmp(src.rows(), cols);
  for (std::size_t r = 0; r < src.rows(); ++r) {
    for (std::size_t x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (const auto& [j, w] : col_w[x]) acc += w * src(r, j);
      tmp(r, x) = acc;
    }
  }
  Map2d out(rows, cols);
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (const auto& [i, w] : row_w[y]) acc += w * tmp(i, x);
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace ragseg
