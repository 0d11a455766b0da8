#include "ragseg/kmeans.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/Core>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ragseg/error.hpp"
#include "ragseg/parallel.hpp"

namespace ragseg {

namespace {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Points per GEMM block. Fixed so the per-point work never depends on the
// worker count.
constexpr std::size_t kAssignChunk = 256;
constexpr std::size_t kSumChunk = 4096;
constexpr double kFloatEps = 0x1p-24;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) from the top 53 bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(unit() * static_cast<double>(n)));
  }

 private:
  std::mt19937_64 engine_;
};

double sq_dist(const float* x, const double* c, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = static_cast<double>(x[i]) - c[i];
    acc += diff * diff;
  }
  return acc;
}

double sq_dist(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

struct PointSet {
  const float* data = nullptr;
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<float> owned;

  const float* row(std::size_t i) const { return data + i * dim; }
};

PointSet prepare_points(const RawDatabase& db, SimilarityMetric metric) {
  PointSet pts;
  pts.n = db.size();
  pts.dim = db.dim();
  if (metric != SimilarityMetric::cosine) {
    pts.data = db.vectors().data();
    return pts;
  }
  pts.owned.resize(db.vectors().size());
  for (std::size_t i = 0; i < pts.n; ++i) {
    const auto v = db.pair(i).vector;
    double n2 = 0.0;
    for (float x : v) n2 += static_cast<double>(x) * x;
    if (n2 == 0.0) throw DataError(fmt::format("kmeans: zero vector at pair {} cannot be normalized", i));
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t j = 0; j < pts.dim; ++j) {
      pts.owned[i * pts.dim + j] = static_cast<float>(v[j] * inv);
    }
  }
  pts.data = pts.owned.data();
  return pts;
}

double chunked_sum(std::span<const double> values, std::vector<double>& chunk_sums) {
  const std::size_t chunks = (values.size() + kSumChunk - 1) / kSumChunk;
  chunk_sums.assign(chunks, 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t end = std::min(values.size(), (c + 1) * kSumChunk);
    double acc = 0.0;
    for (std::size_t i = c * kSumChunk; i < end; ++i) acc += values[i];
    chunk_sums[c] = acc;
    total += acc;
  }
  return total;
}

// kmeans++ seeding. A point whose current nearest seed is at squared distance
// d from it cannot move to a new seed lying at squared distance >= 4d from
// that nearest seed, so those points are skipped without changing the result.
std::vector<double> seed_plus_plus(const PointSet& pts, std::size_t k, Rng& rng, std::size_t threads) {
  const std::size_t n = pts.n;
  const std::size_t d = pts.dim;
  std::vector<double> centers(k * d);
  std::vector<double> best(n);
  std::vector<std::uint32_t> owner(n, 0);
  std::vector<char> chosen(n, 0);
  std::vector<double> seed_dist(k, 0.0);
  std::vector<double> chunk_sums;

  auto take = [&](std::size_t j, std::size_t idx) {
    chosen[idx] = 1;
    const float* x = pts.row(idx);
    for (std::size_t t = 0; t < d; ++t) centers[j * d + t] = x[t];
  };

  take(0, rng.below(n));
  parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) best[i] = sq_dist(pts.row(i), centers.data(), d);
  });

  std::size_t chosen_count = 1;
  for (std::size_t j = 1; j < k; ++j) {
    const double total = chunked_sum(best, chunk_sums);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.unit() * total;
      double acc = 0.0;
      std::size_t c = 0;
      while (c + 1 < chunk_sums.size() && acc + chunk_sums[c] <= target) acc += chunk_sums[c++];
      std::size_t last_positive = n;
      for (std::size_t i = c * kSumChunk; i < std::min(n, (c + 1) * kSumChunk); ++i) {
        if (best[i] <= 0.0) continue;
        last_positive = i;
        acc += best[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = last_positive;
      if (pick == n) {
        // Rounding pushed the target past every positive entry of this chunk.
        for (std::size_t i = n; i-- > 0;) {
          if (best[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every point coincides with a seed: pick uniformly among unchosen points.
      std::size_t r = rng.below(n - chosen_count);
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        if (r-- == 0) {
          pick = i;
          break;
        }
      }
    }
    take(j, pick);
    ++chosen_count;

    const double* cj = centers.data() + j * d;
    for (std::size_t a = 0; a < j; ++a) seed_dist[a] = sq_dist(cj, centers.data() + a * d, d);

    parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        if (seed_dist[owner[i]] >= 4.0 * best[i] * (1.0 + 1e-9)) continue;
        const double dist = sq_dist(pts.row(i), cj, d);
        if (dist < best[i]) {
          best[i] = dist;
          owner[i] = static_cast<std::uint32_t>(j);
        }
      }
    });
  }
  return centers;
}

struct Assignment {
  std::vector<std::uint32_t> owner;
  std::vector<double> dist;
  double objective = 0.0;
};

// Exact nearest-centroid assignment. A float GEMM shortlists the centroids
// within a rounding-error margin of the float minimum; the shortlist is then
// scored in double, ties going to the lowest centroid index.
Assignment assign(const PointSet& pts, const std::vector<double>& centers, std::size_t k,
                  std::size_t threads) {
  const std::size_t n = pts.n;
  const std::size_t d = pts.dim;

  RowMatrixF cf(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t t = 0; t < d; ++t) cf(j, t) = static_cast<float>(centers[j * d + t]);
  }
  const Eigen::VectorXf cn2 = cf.rowwise().squaredNorm();
  double cmax = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double n2 = 0.0;
    for (std::size_t t = 0; t < d; ++t) n2 += centers[j * d + t] * centers[j * d + t];
    cmax = std::max(cmax, std::sqrt(n2));
  }
  const double margin_scale = 4.0 * static_cast<double>(d + 8) * kFloatEps;

  Assignment out;
  out.owner.resize(n);
  out.dist.resize(n);
  const std::size_t chunks = (n + kAssignChunk - 1) / kAssignChunk;

  parallel_for(chunks, threads, [&](std::size_t cb, std::size_t ce) {
    RowMatrixF dots;
    std::vector<std::uint32_t> shortlist;
    for (std::size_t c = cb; c < ce; ++c) {
      const std::size_t begin = c * kAssignChunk;
      const std::size_t rows = std::min(kAssignChunk, n - begin);
      Eigen::Map<const RowMatrixF> xc(pts.row(begin), static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(d));
      dots.noalias() = xc * cf.transpose();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = begin + r;
        const float* x = pts.row(i);
        double xn2 = 0.0;
        for (std::size_t t = 0; t < d; ++t) xn2 += static_cast<double>(x[t]) * x[t];
        const double xn = std::sqrt(xn2);

        float best_f = std::numeric_limits<float>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
          best_f = std::min(best_f, cn2[static_cast<Eigen::Index>(j)] - 2.0f * dots(r, j));
        }
        const double cutoff = best_f + margin_scale * (xn + cmax) * (xn + cmax);
        shortlist.clear();
        for (std::size_t j = 0; j < k; ++j) {
          if (cn2[static_cast<Eigen::Index>(j)] - 2.0f * dots(r, j) <= cutoff) {
            shortlist.push_back(static_cast<std::uint32_t>(j));
          }
        }
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (std::uint32_t j : shortlist) {
          const double dist = sq_dist(x, centers.data() + j * d, d);
          if (dist < best) {
            best = dist;
            arg = j;
          }
        }
        out.owner[i] = arg;
        out.dist[i] = best;
      }
    }
  });
  return out;
}

// Moves the point farthest from its centroid into each empty cluster and
// re-centres that cluster on it. Returns the objective after repair.
double repair_and_score(const PointSet& pts, Assignment& a, std::vector<double>& centers, std::size_t k) {
  const std::size_t d = pts.dim;
  std::vector<std::size_t> counts(k, 0);
  for (auto o : a.owner) ++counts[o];
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] != 0) continue;
    std::size_t far = pts.n;
    double far_dist = -1.0;
    for (std::size_t i = 0; i < pts.n; ++i) {
      if (counts[a.owner[i]] > 1 && a.dist[i] > far_dist) {
        far_dist = a.dist[i];
        far = i;
      }
    }
    --counts[a.owner[far]];
    a.owner[far] = static_cast<std::uint32_t>(j);
    a.dist[far] = 0.0;
    counts[j] = 1;
    const float* x = pts.row(far);
    for (std::size_t t = 0; t < d; ++t) centers[j * d + t] = x[t];
  }
  double objective = 0.0;
  for (double v : a.dist) objective += v;
  a.objective = objective;
  return objective;
}

std::vector<double> update_centers(const PointSet& pts, const std::vector<std::uint32_t>& owner,
                                   const std::vector<double>& previous, std::size_t k, bool spherical) {
  const std::size_t d = pts.dim;
  std::vector<double> sums(k * d, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < pts.n; ++i) {
    const float* x = pts.row(i);
    double* s = sums.data() + owner[i] * d;
    for (std::size_t t = 0; t < d; ++t) s[t] += x[t];
    ++counts[owner[i]];
  }
  for (std::size_t j = 0; j < k; ++j) {
    double* s = sums.data() + j * d;
    if (counts[j] == 0) {
      std::copy_n(previous.data() + j * d, d, s);
      continue;
    }
    const double inv = 1.0 / static_cast<double>(counts[j]);
    for (std::size_t t = 0; t < d; ++t) s[t] *= inv;
    if (spherical) {
      double n2 = 0.0;
      for (std::size_t t = 0; t < d; ++t) n2 += s[t] * s[t];
      if (n2 > 0.0) {
        const double norm = std::sqrt(n2);
        for (std::size_t t = 0; t < d; ++t) s[t] /= norm;
      } else {
        std::copy_n(previous.data() + j * d, d, s);
      }
    }
  }
  return sums;
}

double max_relative_shift(const std::vector<double>& next, const std::vector<double>& prev, std::size_t k,
                          std::size_t d) {
  double worst = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double delta = 0.0;
    double base = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = next[j * d + t] - prev[j * d + t];
      delta += diff * diff;
      base += prev[j * d + t] * prev[j * d + t];
    }
    worst = std::max(worst, std::sqrt(delta) / std::max(std::sqrt(base), 1e-12));
  }
  return worst;
}

double objective_of(const PointSet& pts, const std::vector<std::uint32_t>& owner, const std::vector<double>& centers) {
  double total = 0.0;
  for (std::size_t i = 0; i < pts.n; ++i) total += sq_dist(pts.row(i), centers.data() + owner[i] * pts.dim, pts.dim);
  return total;
}

}  // namespace

KMeansResult cluster(const RawDatabase& db, const KMeansConfig& cfg) {
  if (cfg.k == 0) throw DataError("kmeans: k must be at least 1");
  if (cfg.k > db.size()) {
    throw DataError(fmt::format("k exceeds database size ({} > {})", cfg.k, db.size()));
  }
  if (cfg.max_iters == 0) throw DataError("kmeans: max_iters must be at least 1");
  if (!(cfg.tol >= 0.0)) throw DataError("kmeans: tol must be non-negative");
  if (cfg.k > std::numeric_limits<std::uint32_t>::max()) throw DataError("kmeans: k too large");

  const std::size_t threads = resolve_threads(cfg.threads);
  const bool spherical = cfg.metric == SimilarityMetric::cosine;
  const PointSet pts = prepare_points(db, cfg.metric);
  const std::size_t k = cfg.k;
  const std::size_t d = pts.dim;

  Rng rng(cfg.seed);
  std::vector<double> centers = seed_plus_plus(pts, k, rng, threads);

  std::vector<double> trace;
  Assignment current = assign(pts, centers, k, threads);
  trace.push_back(repair_and_score(pts, current, centers, k));

  bool centers_are_means = false;
  std::size_t iters = 0;
  while (iters < cfg.max_iters) {
    std::vector<double> next = update_centers(pts, current.owner, centers, k, spherical);
    const double shift = max_relative_shift(next, centers, k, d);
    centers = std::move(next);
    ++iters;

    Assignment fresh = assign(pts, centers, k, threads);
    trace.push_back(repair_and_score(pts, fresh, centers, k));
    const bool unchanged = fresh.owner == current.owner;
    current = std::move(fresh);
    if (unchanged) {
      centers_are_means = true;
      break;
    }
    if (shift < cfg.tol) break;
  }
  if (!centers_are_means) {
    centers = update_centers(pts, current.owner, centers, k, spherical);
    trace.push_back(objective_of(pts, current.owner, centers));
  }

  std::vector<double> score_sums(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  const auto masks = db.mask_scores();
  for (std::size_t i = 0; i < pts.n; ++i) {
    score_sums[current.owner[i]] += masks[i];
    ++counts[current.owner[i]];
  }
  std::vector<float> scores(k);
  for (std::size_t j = 0; j < k; ++j) {
    scores[j] = static_cast<float>(score_sums[j] / static_cast<double>(counts[j]));
  }
  std::vector<float> centroids(centers.begin(), centers.end());

  return KMeansResult{
      ClusteredStore(d, std::move(centroids), std::move(scores), cfg.metric, spherical),
      std::move(trace),
      iters,
      std::move(current.owner),
  };
}

TimedKMeans timed_cluster(const RawDatabase& db, const KMeansConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  KMeansResult result = cluster(db, cfg);
  const auto stop = std::chrono::steady_clock::now();
  return {std::move(result), std::chrono::duration<double>(stop - start).count()};
}

void write_objective_csv(std::ostream& out, std::span<const double> trace) {
  out << "iter,objective\n";
  for (std::size_t i = 0; i < trace.size(); ++i) fmt::print(out, "{},{:.17g}\n", i, trace[i]);
}

}  // namespace ragseg
