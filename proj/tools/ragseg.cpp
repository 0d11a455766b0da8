#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ragseg/bench.hpp"
#include "ragseg/error.hpp"
#include "ragseg/kmeans.hpp"
#include "ragseg/metrics.hpp"
#include "ragseg/parallel.hpp"
#include "ragseg/pgm.hpp"
#include "ragseg/prompts.hpp"
#include "ragseg/pseudolabel.hpp"
#include "ragseg/search.hpp"
#include "ragseg/store.hpp"
#include "ragseg/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace ragseg;

namespace {

constexpr int kExitArgs = 1;
constexpr int kExitData = 2;
constexpr int kExitIo = 3;

std::map<std::string, fs::path> files_by_stem(const fs::path& dir, std::initializer_list<const char*> exts) {
  if (!fs::is_directory(dir)) throw IoError(fmt::format("'{}': not a directory", dir.string()));
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    bool wanted = false;
    for (const char* e : exts) wanted = wanted || ext == e;
    if (!wanted) continue;
    if (!out.emplace(entry.path().stem().string(), entry.path()).second) {
      throw DataError(fmt::format("'{}': several files share stem '{}'", dir.string(), entry.path().stem().string()));
    }
  }
  return out;
}

std::size_t grid_side_of(std::size_t tokens) {
  const auto g = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(tokens))));
  if (g * g != tokens) throw DataError(fmt::format("{} tokens do not form a square grid", tokens));
  return g;
}

// Accepted mask files: RSGT of T token scores, or any map (RSGT HxW / PGM)
// that average-pools onto the g x g token grid.
std::vector<float> token_mask(const fs::path& path, std::size_t grid_side) {
  if (path.extension() == ".rsgt") {
    const Tensor t = read_tensor(path);
    if (t.rank() == 1) {
      std::vector<float> out;
      if (t.dtype() == DType::f32) {
        out.assign(t.f32().begin(), t.f32().end());
      } else {
        for (std::uint8_t v : t.u8()) out.push_back(static_cast<float>(v / 255.0));
      }
      return out;
    }
  }
  const Map2d pooled = pool_mask(load_map(path), grid_side);
  return {pooled.values().begin(), pooled.values().end()};
}

RawDatabase load_database(const fs::path& features_dir, const fs::path& masks_dir) {
  const auto features = files_by_stem(features_dir, {".rsgt"});
  const auto masks = files_by_stem(masks_dir, {".rsgt", ".pgm"});
  if (features.empty()) throw DataError(fmt::format("'{}': no feature tensors", features_dir.string()));
  std::vector<Tensor> tensors;
  std::vector<std::vector<float>> token_masks;
  for (const auto& [stem, path] : features) {
    const auto it = masks.find(stem);
    if (it == masks.end()) throw DataError(fmt::format("no mask for features '{}'", stem));
    tensors.push_back(read_tensor(path));
    if (tensors.back().rank() != 2) throw DataError(fmt::format("features '{}' must be a T x D tensor", stem));
    token_masks.push_back(token_mask(it->second, grid_side_of(tensors.back().dims()[0])));
  }
  for (const auto& [stem, path] : masks) {
    if (!features.contains(stem)) throw DataError(fmt::format("no features for mask '{}'", stem));
  }
  return ingest(tensors, token_masks);
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

SimilarityMetric metric_option(const std::string& text) { return parse_metric(text); }

std::pair<std::size_t, std::size_t> parse_resolution(const std::string& text) {
  std::size_t h = 0, w = 0;
  char x = 0;
  std::istringstream in(text);
  if (!(in >> h >> x >> w) || (x != 'x' && x != 'X') || !in.eof() || h == 0 || w == 0) {
    throw std::invalid_argument(fmt::format("resolution '{}' is not HxW", text));
  }
  return {h, w};
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument("");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt::format("bad K list '{}'", text));
    }
  }
  if (out.empty()) throw std::invalid_argument("empty K list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-based segmentation pseudo-labels: database build, query, prompts, evaluation, benchmarks."};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "RNG seed (u64)")->capture_default_str();
    sub->add_option("--threads", threads, "Worker count (0 = RAGSEG_THREADS or hardware)")->capture_default_str();
  };

  // build-db
  fs::path bd_features, bd_masks, bd_out, bd_objective;
  std::size_t bd_k = 4096, bd_iters = 200;
  double bd_tol = 1e-6;
  std::string bd_metric = "ip";
  auto* build = app.add_subcommand("build-db", "Cluster vector-mask pairs into an RSDB store");
  build->add_option("--features", bd_features, "Directory of T x D f32 RSGT feature tensors")->required();
  build->add_option("--masks", bd_masks, "Directory of masks paired by stem (RSGT or PGM)")->required();
  build->add_option("--k", bd_k, "Cluster count K")->capture_default_str();
  build->add_option("--iters", bd_iters, "Maximum Lloyd iterations")->capture_default_str();
  build->add_option("--tol", bd_tol, "Relative centroid-shift stopping threshold")->capture_default_str();
  build->add_option("--metric", bd_metric, "Retrieval metric: ip, cosine or l2")->capture_default_str();
  build->add_option("--out", bd_out, "Output RSDB path")->required();
  build->add_option("--objective-csv", bd_objective, "Optional objective trace CSV");
  common(build);

  // query
  fs::path q_store, q_features, q_out, q_pgm, q_grid_out;
  std::size_t q_grid = 0, q_topk = 1;
  std::string q_resolution, q_threshold = "T3", q_metric;
  auto* query = app.add_subcommand("query", "Generate a pseudo-label from query tokens");
  query->add_option("--store", q_store, "RSDB store")->required();
  query->add_option("--features", q_features, "Query tokens: G^2 x D f32 RSGT")->required();
  query->add_option("--grid", q_grid, "Token grid side G (default: inferred)");
  query->add_option("--resolution", q_resolution, "Output HxW; must be 14G x 14G (default: 14G x 14G)");
  query->add_option("--topk", q_topk, "Neighbours averaged per token")->capture_default_str();
  query->add_option("--threshold", q_threshold, "T0..T9, TN or a value in (0,1)")->capture_default_str();
  query->add_option("--metric", q_metric, "Override the store metric: ip, cosine or l2");
  query->add_option("--out", q_out, "Pseudo-label RSGT (f32 H x W)")->required();
  query->add_option("--pgm", q_pgm, "Also write the pseudo-label as PGM");
  query->add_option("--grid-out", q_grid_out, "Also write the G x G token map as RSGT");
  common(query);

  // prompts
  fs::path p_label, p_out;
  PromptConfig p_cfg;
  auto* prompts = app.add_subcommand("prompts", "Extract point and mask prompts from a pseudo-label");
  prompts->add_option("--label", p_label, "Pseudo-label map (RSGT or PGM)")->required();
  prompts->add_option("--out", p_out, "Output JSON; the mask prompt goes to <stem>_mask.rsgt")->required();
  prompts->add_option("--t-pos", p_cfg.t_pos, "Positive point threshold")->capture_default_str();
  prompts->add_option("--t-neg", p_cfg.t_neg, "Negative point threshold")->capture_default_str();
  prompts->add_option("--mask-tau", p_cfg.mask_tau, "Mask prompt threshold")->capture_default_str();
  prompts->add_option("--max-points", p_cfg.max_points, "Points per polarity")->capture_default_str();
  common(prompts);

  // eval
  fs::path e_pred, e_gt, e_json, e_csv;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--pred", e_pred, "Prediction directory (RSGT or PGM)")->required();
  eval->add_option("--gt", e_gt, "Ground-truth directory (PGM or RSGT)")->required();
  eval->add_option("--json", e_json, "Write the JSON report here");
  eval->add_option("--csv", e_csv, "Write the CSV report here (default: standard output)");
  common(eval);

  // bench
  fs::path b_features, b_masks, b_csv;
  std::string b_k = "512,1024,2048,4096,8192", b_metric = "ip";
  std::size_t b_synthetic = 0, b_dim = 128, b_centers = 64;
  BenchConfig b_cfg;
  auto* bench = app.add_subcommand("bench", "Clustering time, query latency and store size over a K sweep");
  bench->add_option("--features", b_features, "Feature directory (with --masks)");
  bench->add_option("--masks", b_masks, "Mask directory (with --features)");
  bench->add_option("--synthetic", b_synthetic, "Use a synthetic database of this many vectors");
  bench->add_option("--dim", b_dim, "Synthetic vector dimension")->capture_default_str();
  bench->add_option("--centers", b_centers, "Synthetic blob count")->capture_default_str();
  bench->add_option("--k", b_k, "Comma-separated K values")->capture_default_str();
  bench->add_option("--tokens", b_cfg.tokens_per_query, "Tokens per query")->capture_default_str();
  bench->add_option("--queries", b_cfg.num_queries, "Timed queries")->capture_default_str();
  bench->add_option("--warmup", b_cfg.warmup_queries, "Untimed warm-up queries")->capture_default_str();
  bench->add_option("--topk", b_cfg.topk, "Neighbours per token")->capture_default_str();
  bench->add_option("--metric", b_metric, "ip, cosine or l2")->capture_default_str();
  bench->add_option("--iters", b_cfg.kmeans_iters, "Maximum Lloyd iterations per K")->capture_default_str();
  bench->add_option("--throughput-workers", b_cfg.throughput_workers,
                    "Also measure multi-worker throughput (0 = off)")
      ->capture_default_str();
  bench->add_option("--out", b_csv, "CSV path (default: standard output)");
  common(bench);

  // merge
  fs::path m_a, m_b, m_out;
  auto* merge_cmd = app.add_subcommand("merge", "Concatenate two compatible stores");
  merge_cmd->add_option("a", m_a, "First RSDB")->required();
  merge_cmd->add_option("b", m_b, "Second RSDB")->required();
  merge_cmd->add_option("--out", m_out, "Merged RSDB")->required();
  common(merge_cmd);

  // hist
  fs::path h_store, h_out;
  auto* hist = app.add_subcommand("hist", "Histogram of centroid mask scores over 10 bins");
  hist->add_option("--store", h_store, "RSDB store")->required();
  hist->add_option("--out", h_out, "CSV path (default: standard output)");
  common(hist);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitArgs;
  }

  try {
    if (build->parsed()) {
      const RawDatabase db = load_database(bd_features, bd_masks);
      KMeansConfig cfg;
      cfg.k = bd_k;
      cfg.max_iters = bd_iters;
      cfg.seed = seed;
      cfg.tol = bd_tol;
      cfg.metric = metric_option(bd_metric);
      cfg.threads = threads;
      const KMeansResult result = cluster(db, cfg);
      write_store(bd_out, result.store);
      if (!bd_objective.empty()) {
        std::ostringstream csv;
        write_objective_csv(csv, result.objective_trace);
        write_text(bd_objective, csv.str());
      }
      std::cout << fmt::format("pairs={} K={} iters={} objective={:.9g}\n", db.size(), result.store.size(),
                               result.iterations_run, result.objective_trace.back());
    } else if (query->parsed()) {
      const ClusteredStore store = read_store(q_store);
      const Tensor tokens = read_tensor(q_features);
      if (tokens.rank() != 2) throw DataError("query features must be a T x D tensor");
      const std::size_t g = q_grid != 0 ? q_grid : grid_side_of(tokens.dims()[0]);
      std::size_t h = g * kPatchSize, w = g * kPatchSize;
      if (!q_resolution.empty()) std::tie(h, w) = parse_resolution(q_resolution);
      const auto strategy = ThresholdStrategy::parse(q_threshold);
      const SimilarityMetric metric = q_metric.empty() ? store.metric() : metric_option(q_metric);
      const QueryGrid grid({tokens.f32().begin(), tokens.f32().end()}, tokens.dims()[1], g, h, w);
      const PseudoLabel label = apply_threshold(generate(FlatIndex(store, metric), grid, q_topk,
                                                         resolve_threads(threads)),
                                                strategy);
      std::vector<float> values(label.values.values().begin(), label.values.values().end());
      write_tensor(q_out, Tensor::from_f32({h, w}, std::move(values)));
      if (!q_pgm.empty()) write_pgm(q_pgm, label.values);
      if (!q_grid_out.empty()) {
        std::vector<float> cells(label.grid.values().begin(), label.grid.values().end());
        write_tensor(q_grid_out, Tensor::from_f32({g, g}, std::move(cells)));
      }
    } else if (prompts->parsed()) {
      write_prompts(extract_prompts(load_map(p_label), p_cfg), p_out);
    } else if (eval->parsed()) {
      const MetricsReport report = evaluate_dir(e_pred, e_gt, threads);
      if (!e_json.empty()) write_text(e_json, report_json(report));
      std::ostringstream csv;
      write_report_csv(csv, report);
      if (e_csv.empty()) {
        std::cout << csv.str();
      } else {
        write_text(e_csv, csv.str());
      }
    } else if (bench->parsed()) {
      b_cfg.k_values = parse_k_list(b_k);
      b_cfg.metric = metric_option(b_metric);
      b_cfg.seed = seed;
      const bool from_dirs = !b_features.empty() || !b_masks.empty();
      if (from_dirs == (b_synthetic != 0)) {
        throw std::invalid_argument("bench needs either --features/--masks or --synthetic N");
      }
      if (from_dirs && (b_features.empty() || b_masks.empty())) {
        throw std::invalid_argument("--features and --masks go together");
      }
      const RawDatabase db = from_dirs ? load_database(b_features, b_masks)
                                       : synthetic_database(b_synthetic, b_dim, b_centers, 0.1, seed);
      const BenchReport report = run_bench(db, b_cfg);
      std::ostringstream csv;
      write_bench_csv(csv, report);
      if (b_csv.empty()) {
        std::cout << csv.str();
      } else {
        write_text(b_csv, csv.str());
      }
      if (b_cfg.throughput_workers > 0) {
        for (const BenchRow& r : report.rows) {
          std::cerr << fmt::format("throughput k={} workers={} queries_per_s={:.6g}\n", r.k,
                                   b_cfg.throughput_workers, r.throughput_qps);
        }
      }
    } else if (merge_cmd->parsed()) {
      const ClusteredStore merged = merge(read_store(m_a), read_store(m_b));
      write_store(m_out, merged);
      std::cout << fmt::format("K={}\n", merged.size());
    } else if (hist->parsed()) {
      std::ostringstream csv;
      write_histogram_csv(csv, histogram(read_store(h_store)));
      if (h_out.empty()) {
        std::cout << csv.str();
      } else {
        write_text(h_out, csv.str());
      }
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitArgs;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
