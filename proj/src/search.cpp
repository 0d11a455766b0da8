#include "ragseg/search.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <fmt/format.h>

#include "ragseg/error.hpp"
#include "ragseg/parallel.hpp"

namespace ragseg {

namespace {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kFloatEps = 0x1p-24;
constexpr std::size_t kMaxQueryChunk = 256;
constexpr std::size_t kScoreBudget = std::size_t{1} << 22;  // floats per GEMM block

std::size_t query_chunk(std::size_t store_size) {
  return std::clamp<std::size_t>(kScoreBudget / store_size, 1, kMaxQueryChunk);
}

bool hit_before(const SearchHit& a, const SearchHit& b) {
  return a.score > b.score || (a.score == b.score && a.index < b.index);
}

void validate_query(std::span<const float> q, std::size_t dim) {
  if (q.size() != dim) throw DataError(fmt::format("query dim {} != store dim {}", q.size(), dim));
  for (float v : q) {
    if (!std::isfinite(v)) throw DataError("query contains NaN or Inf");
  }
}

}  // namespace

FlatIndex::FlatIndex(const ClusteredStore& store) : FlatIndex(store, store.metric()) {}

FlatIndex::FlatIndex(const ClusteredStore& store, SimilarityMetric metric) : store_(&store), metric_(metric) {
  if (metric_ == SimilarityMetric::cosine && !store.normalized()) {
    throw DataError("cosine search requires a normalized store");
  }
  norms2_.resize(store.size());
  for (std::size_t j = 0; j < store.size(); ++j) {
    double n2 = 0.0;
    float f2 = 0.0f;
    for (float v : store.centroid(j)) {
      n2 += static_cast<double>(v) * v;
      f2 += v * v;
    }
    norms2_[j] = f2;
    max_norm_ = std::max(max_norm_, std::sqrt(n2));
  }
}

std::vector<SearchHit> FlatIndex::search(std::span<const float> query, std::size_t k) const {
  auto hits = search_batch(query, k, 1);
  return std::move(hits.front());
}

std::vector<std::vector<SearchHit>> FlatIndex::search_batch(std::span<const float> queries, std::size_t k,
                                                            std::size_t threads) const {
  const std::size_t d = dim();
  if (k == 0) throw DataError("k must be a positive integer");
  if (k > size()) throw DataError(fmt::format("k={} exceeds store size {}", k, size()));
  if (queries.empty() || queries.size() % d != 0) {
    throw DataError(fmt::format("query matrix of {} values is not a multiple of dim {}", queries.size(), d));
  }
  const std::size_t count = queries.size() / d;
  for (std::size_t i = 0; i < count; ++i) validate_query(queries.subspan(i * d, d), d);

  std::vector<std::vector<SearchHit>> out(count);
  const std::size_t chunk = query_chunk(size());
  const std::size_t blocks = (count + chunk - 1) / chunk;
  parallel_for(blocks, std::max<std::size_t>(1, threads), [&](std::size_t b, std::size_t e) {
    for (std::size_t blk = b; blk < e; ++blk) {
      const std::size_t begin = blk * chunk;
      search_block(queries.data() + begin * d, std::min(chunk, count - begin), k, out, begin);
    }
  });
  return out;
}

void FlatIndex::search_block(const float* queries, std::size_t count, std::size_t k,
                             std::vector<std::vector<SearchHit>>& out, std::size_t out_offset) const {
  const std::size_t d = dim();
  const std::size_t n = size();
  const auto ed = static_cast<Eigen::Index>(d);
  const auto mask_scores = store_->mask_scores();
  const float* base = store_->centroids().data();
  Eigen::Map<const RowMatrixF> centroids(base, static_cast<Eigen::Index>(n), ed);

  // Float copies for the shortlist GEMM; cosine queries are normalized here.
  RowMatrixF q(static_cast<Eigen::Index>(count), ed);
  std::vector<double> qnorm(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float* src = queries + i * d;
    double n2 = 0.0;
    for (std::size_t t = 0; t < d; ++t) n2 += static_cast<double>(src[t]) * src[t];
    qnorm[i] = std::sqrt(n2);
    if (metric_ == SimilarityMetric::cosine && qnorm[i] == 0.0) {
      throw DataError("cosine search with a zero query vector");
    }
    const double scale = metric_ == SimilarityMetric::cosine ? 1.0 / qnorm[i] : 1.0;
    for (std::size_t t = 0; t < d; ++t) q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = static_cast<float>(src[t] * scale);
  }
  const RowMatrixF dots = q * centroids.transpose();

  const double gamma = 8.0 * static_cast<double>(d + 8) * kFloatEps;
  std::vector<float> approx(n);
  std::vector<float> scratch(n);
  std::vector<double> qd(d);
  std::vector<SearchHit> shortlist;

  for (std::size_t i = 0; i < count; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n; ++j) {
      const float dot = dots(row, static_cast<Eigen::Index>(j));
      approx[j] = metric_ == SimilarityMetric::l2 ? 2.0f * dot - norms2_[j] : dot;
    }
    scratch = approx;
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end(),
                     std::greater<>());
    const double kth = scratch[k - 1];
    const double qn = metric_ == SimilarityMetric::cosine ? 1.0 : qnorm[i];
    const double margin = metric_ == SimilarityMetric::l2 ? gamma * (qn + max_norm_) * (qn + max_norm_)
                                                          : gamma * (qn * max_norm_ + 1e-30);
    const double cutoff = kth - margin;

    const float* src = queries + i * d;
    const double inv = metric_ == SimilarityMetric::cosine ? 1.0 / qnorm[i] : 1.0;
    for (std::size_t t = 0; t < d; ++t) qd[t] = static_cast<double>(src[t]) * inv;

    shortlist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (approx[j] < cutoff) continue;
      const float* c = base + j * d;
      double score = 0.0;
      if (metric_ == SimilarityMetric::l2) {
        for (std::size_t t = 0; t < d; ++t) {
          const double diff = qd[t] - static_cast<double>(c[t]);
          score += diff * diff;
        }
        score = -score;
      } else {
        for (std::size_t t = 0; t < d; ++t) score += qd[t] * static_cast<double>(c[t]);
      }
      shortlist.push_back({static_cast<std::uint32_t>(j), score, mask_scores[j]});
    }
    const auto take = std::min(k, shortlist.size());
    std::partial_sort(shortlist.begin(), shortlist.begin() + static_cast<std::ptrdiff_t>(take), shortlist.end(),
                      hit_before);
    shortlist.resize(take);
    out[out_offset + i] = shortlist;
  }
}

std::vector<SearchHit> search_topk(const ClusteredStore& store, std::span<const float> query, std::size_t k) {
  return FlatIndex(store).search(query, k);
}

std::vector<std::vector<SearchHit>> search_batch(const ClusteredStore& store, std::span<const float> queries,
                                                 std::size_t k, std::size_t threads) {
  return FlatIndex(store).search_batch(queries, k, threads);
}

}  // namespace ragseg
