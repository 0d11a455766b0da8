#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ragseg/map2d.hpp"

namespace oracle {

// Bilinear sample of `g` at output pixel (y, x) of an H x W target, evaluated
// from the half-pixel mapping formula one pixel at a time.
inline double bilinear_at(const ragseg::Map2d& g, std::size_t H, std::size_t W, std::size_t y, std::size_t x) {
  const auto src = [](std::size_t o, std::size_t in, std::size_t out) {
    const double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  const double sy = src(y, g.rows(), H);
  const double sx = src(x, g.cols(), W);
  const auto y0 = static_cast<std::size_t>(std::floor(sy));
  const auto x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, g.rows() - 1);
  const std::size_t x1 = std::min(x0 + 1, g.cols() - 1);
  const double fy = sy - static_cast<double>(y0);
  const double fx = sx - static_cast<double>(x0);
  return (1 - fy) * ((1 - fx) * g(y0, x0) + fx * g(y0, x1)) + fy * ((1 - fx) * g(y1, x0) + fx * g(y1, x1));
}

// Block means over exact pixel blocks.
inline ragseg::Map2d block_means(const ragseg::Map2d& m, std::size_t g) {
  const std::size_t bh = m.rows() / g, bw = m.cols() / g;
  ragseg::Map2d out(g, g);
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      double s = 0.0;
      for (std::size_t r = i * bh; r < (i + 1) * bh; ++r) {
        for (std::size_t c = j * bw; c < (j + 1) * bw; ++c) s += m(r, c);
      }
      out(i, j) = s / static_cast<double>(bh * bw);
    }
  }
  return out;
}

// Ten bins [i/10, (i+1)/10), the last one closed, found by linear scan.
inline std::array<std::size_t, 10> bin_counts(std::span<const float> scores) {
  std::array<std::size_t, 10> counts{};
  for (float s : scores) {
    const double v = s;
    for (int b = 9; b >= 0; --b) {
      if (v >= b / 10.0) {
        ++counts[static_cast<std::size_t>(b)];
        break;
      }
    }
  }
  return counts;
}

}  // namespace oracle
