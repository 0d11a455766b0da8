#pragma once

// Random inputs shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ragseg/clustered_store.hpp"
#include "ragseg/map2d.hpp"
#include "ragseg/store.hpp"

namespace fixtures {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline std::vector<float> gaussian(Rng& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(nd(rng));
  return v;
}

inline void normalize_rows(std::vector<float>& v, std::size_t dim) {
  for (std::size_t i = 0; i < v.size() / dim; ++i) {
    double n2 = 0.0;
    for (std::size_t t = 0; t < dim; ++t) n2 += static_cast<double>(v[i * dim + t]) * v[i * dim + t];
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t t = 0; t < dim; ++t) v[i * dim + t] = static_cast<float>(v[i * dim + t] * inv);
  }
}

inline std::vector<float> scores(Rng& rng, std::size_t n) {
  std::vector<float> s(n);
  for (float& x : s) x = static_cast<float>(uniform(rng));
  return s;
}

// Random store; with `quantized`, coordinates are small integers so that
// exact score ties and duplicate rows are common.
inline ragseg::ClusteredStore random_store(Rng& rng, std::size_t k, std::size_t dim, ragseg::SimilarityMetric metric,
                                           bool quantized = false) {
  std::vector<float> c = gaussian(rng, k * dim);
  if (quantized) {
    for (float& x : c) x = std::round(x * 1.5f);
    for (std::size_t i = 0; i < k; ++i) {
      bool zero = true;
      for (std::size_t t = 0; t < dim; ++t) zero = zero && c[i * dim + t] == 0.0f;
      if (zero) c[i * dim] = 1.0f;
    }
    for (std::size_t i = 1; i < k; i += 7) {
      std::copy_n(c.begin() + static_cast<std::ptrdiff_t>((i - 1) * dim), dim,
                  c.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
  }
  const bool normalized = metric == ragseg::SimilarityMetric::cosine;
  if (normalized) normalize_rows(c, dim);
  return ragseg::ClusteredStore(dim, std::move(c), scores(rng, k), metric, normalized);
}

inline ragseg::RawDatabase random_database(Rng& rng, std::size_t n, std::size_t dim) {
  return ragseg::RawDatabase(dim, gaussian(rng, n * dim), scores(rng, n), 1);
}

// Smooth random map in [0, 1] made of a few Gaussian bumps, with saturated
// plateaus so that both point polarities occur.
inline ragseg::Map2d random_map(Rng& rng, std::size_t h, std::size_t w) {
  ragseg::Map2d m(h, w);
  const std::size_t bumps = pick(rng, 1, 4);
  for (std::size_t b = 0; b < bumps; ++b) {
    const double cy = uniform(rng, 0, static_cast<double>(h));
    const double cx = uniform(rng, 0, static_cast<double>(w));
    const double s = uniform(rng, 0.05, 0.3) * static_cast<double>(std::max(h, w));
    const double a = uniform(rng, 0.5, 1.6);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
        m(r, c) += a * std::exp(-(dy * dy + dx * dx) / (2 * s * s));
      }
    }
  }
  for (double& v : m.values()) v = std::clamp(v - 0.05, 0.0, 1.0);
  return m;
}

// Binary mask: union of random rectangles kept `margin` pixels from the border.
inline ragseg::Map2d random_mask(Rng& rng, std::size_t h, std::size_t w, std::size_t margin = 0) {
  ragseg::Map2d m(h, w);
  const std::size_t rects = pick(rng, 1, 3);
  for (std::size_t i = 0; i < rects; ++i) {
    const std::size_t r0 = pick(rng, margin, h / 2);
    const std::size_t c0 = pick(rng, margin, w / 2);
    const std::size_t r1 = pick(rng, r0 + 1, h - margin);
    const std::size_t c1 = pick(rng, c0 + 1, w - margin);
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t c = c0; c < c1; ++c) m(r, c) = 1.0;
    }
  }
  return m;
}

// Noisy soft prediction of `gt`.
inline ragseg::Map2d noisy_prediction(Rng& rng, const ragseg::Map2d& gt, double noise) {
  ragseg::Map2d p = gt;
  for (double& v : p.values()) v = std::clamp(v * 0.8 + 0.1 + uniform(rng, -noise, noise), 0.0, 1.0);
  return p;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("ragseg_test_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
