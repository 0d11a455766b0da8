#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ragseg {

/// Dense row-major 2-D map of doubles (probability maps, masks, token grids).
class Map2d {
 public:
  Map2d() = default;
  Map2d(std::size_t rows, std::size_t cols, double fill = 0.0);
  Map2d(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double min() const;
  double max() const;
  double mean() const;

  bool operator==(const Map2d&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Bilinear resampling with half-pixel centres:
/// src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1] on each axis.
Map2d resize_bilinear(const Map2d& src, std::size_t rows, std::size_t cols);

/// Box-filter resampling: every output pixel is the overlap-weighted mean of
/// the input pixels its footprint covers. Works for both shrinking and growing.
Map2d resize_area(const Map2d& src, std::size_t rows, std::size_t cols);

}  // namespace ragseg
