#include "ragseg/store.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ragseg/error.hpp"

namespace ragseg {

RawDatabase::RawDatabase(std::size_t dim, std::vector<float> vectors, std::vector<float> mask_scores,
                         std::size_t source_count)
    : dim_(dim), vectors_(std::move(vectors)), mask_scores_(std::move(mask_scores)), source_count_(source_count) {
  if (dim_ == 0) throw DataError("database: dimension must be positive");
  if (mask_scores_.empty()) throw DataError("database: no vector-mask pairs");
  if (vectors_.size() != mask_scores_.size() * dim_) {
    throw DataError("database: vector matrix does not match pair count x dim");
  }
  for (float v : vectors_) {
    if (!std::isfinite(v)) throw DataError("database: NaN or Inf in feature vectors");
  }
  for (float m : mask_scores_) {
    if (!(m >= 0.0f && m <= 1.0f)) throw DataError("database: mask score outside [0,1]");
  }
}

Map2d pool_mask(const Map2d& mask, std::size_t grid_side) {
  if (grid_side == 0) throw DataError("pool_mask: grid side must be positive");
  if (mask.empty()) throw DataError("pool_mask: empty mask");
  if (mask.rows() % grid_side != 0 || mask.cols() % grid_side != 0) {
    throw DataError(fmt::format("pool_mask: {}x{} mask is not divisible by grid side {}", mask.rows(),
                                mask.cols(), grid_side));
  }
  for (double v : mask.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("pool_mask: mask value outside [0,1]");
  }

  const std::size_t bh = mask.rows() / grid_side;
  const std::size_t bw = mask.cols() / grid_side;
  const double area = static_cast<double>(bh * bw);
  Map2d grid(grid_side, grid_side);
  for (std::size_t gr = 0; gr < grid_side; ++gr) {
    for (std::size_t gc = 0; gc < grid_side; ++gc) {
      double acc = 0.0;
      for (std::size_t r = gr * bh; r < (gr + 1) * bh; ++r) {
        for (std::size_t c = gc * bw; c < (gc + 1) * bw; ++c) acc += mask(r, c);
      }
      grid(gr, gc) = acc / area;
    }
  }
  return grid;
}

RawDatabase ingest(std::span<const Tensor> features, std::span<const std::vector<float>> token_masks) {
  if (features.empty()) throw DataError("ingest: no images given");
  if (features.size() != token_masks.size()) {
    throw DataError("ingest: feature and mask lists differ in length");
  }

  std::size_t dim = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const Tensor& f = features[i];
    if (f.dtype() != DType::f32 || f.rank() != 2) {
      throw DataError(fmt::format("ingest: image {} features must be a 2-D f32 tensor", i));
    }
    const auto tokens = static_cast<std::size_t>(f.dims()[0]);
    const auto d = static_cast<std::size_t>(f.dims()[1]);
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(tokens))));
    if (side * side != tokens) {
      throw DataError(fmt::format("ingest: image {} has {} tokens, not a square grid", i, tokens));
    }
    if (dim == 0) dim = d;
    if (d != dim) throw DataError(fmt::format("ingest: image {} has dim {}, expected {}", i, d, dim));
    if (token_masks[i].size() != tokens) {
      throw DataError(fmt::format("ingest: image {} mask length {} != token count {}", i,
                                  token_masks[i].size(), tokens));
    }
    total += tokens;
  }

  std::vector<float> vectors;
  std::vector<float> scores;
  vectors.reserve(total * dim);
  scores.reserve(total);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto values = features[i].f32();
    for (float v : values) {
      if (!std::isfinite(v)) throw DataError(fmt::format("ingest: NaN or Inf in features of image {}", i));
    }
    vectors.insert(vectors.end(), values.begin(), values.end());
    scores.insert(scores.end(), token_masks[i].begin(), token_masks[i].end());
  }
  return RawDatabase(dim, std::move(vectors), std::move(scores), features.size());
}

ClusteredStore merge(const ClusteredStore& a, const ClusteredStore& b) {
  if (a.dim() != b.dim()) throw DataError(fmt::format("merge: dim mismatch ({} vs {})", a.dim(), b.dim()));
  if (a.metric() != b.metric()) throw DataError("merge: metric mismatch");
  if (a.normalized() != b.normalized()) throw DataError("merge: normalization flag mismatch");

  std::vector<float> centroids(a.centroids().begin(), a.centroids().end());
  centroids.insert(centroids.end(), b.centroids().begin(), b.centroids().end());
  std::vector<float> scores(a.mask_scores().begin(), a.mask_scores().end());
  scores.insert(scores.end(), b.mask_scores().begin(), b.mask_scores().end());
  return ClusteredStore(a.dim(), std::move(centroids), std::move(scores), a.metric(), a.normalized());
}

ScoreHistogram histogram(const ClusteredStore& store) {
  ScoreHistogram hist;
  for (std::size_t i = 0; i < hist.edges.size(); ++i) hist.edges[i] = static_cast<double>(i) / 10.0;
  for (float s : store.mask_scores()) {
    const double x = s;
    auto bin = static_cast<std::size_t>(std::min(9.0, std::floor(x * 10.0)));
    // floor(x * 10) can land one bin off near an edge; settle against the edges.
    while (bin < 9 && x >= hist.edges[bin + 1]) ++bin;
    while (bin > 0 && x < hist.edges[bin]) --bin;
    ++hist.counts[bin];
  }
  return hist;
}

void write_histogram_csv(std::ostream& out, const ScoreHistogram& hist) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    fmt::print(out, "{:.1f},{:.1f},{}\n", hist.edges[i], hist.edges[i + 1], hist.counts[i]);
  }
}

}  // namespace ragseg
