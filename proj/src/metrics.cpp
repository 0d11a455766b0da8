#include "ragseg/metrics.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "ragseg/error.hpp"
#include "ragseg/parallel.hpp"
#include "ragseg/pgm.hpp"
#include "ragseg/tensor_io.hpp"

namespace ragseg {

namespace {

constexpr double kEps = DBL_EPSILON;
constexpr int kGaussRadius = 3;
constexpr double kGaussSigma = 5.0;

void check_pair(const Map2d& pred, const Map2d& gt, const char* op) {
  if (pred.empty() || gt.empty()) throw DataError(fmt::format("{}: empty map", op));
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw DataError(fmt::format("{}: shape mismatch {}x{} vs {}x{}", op, pred.rows(), pred.cols(), gt.rows(),
                                gt.cols()));
  }
  for (double v : pred.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError(fmt::format("{}: prediction value outside [0,1]", op));
  }
}

std::vector<bool> foreground(const Map2d& gt) {
  std::vector<bool> fg(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) fg[i] = gt.values()[i] >= kGtBinarizeThreshold;
  return fg;
}

double object_score(double sum, double sum_sq, std::size_t n) {
  const double count = static_cast<double>(n);
  const double x = sum / count;
  double sigma = 0.0;
  if (n > 1) sigma = std::sqrt(std::max(0.0, (sum_sq - count * x * x) / (count - 1.0)));
  return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

double s_object(const Map2d& pred, const std::vector<bool>& fg) {
  double fg_sum = 0.0, fg_sq = 0.0, bg_sum = 0.0, bg_sq = 0.0;
  std::size_t fg_n = 0;
  for (std::size_t i = 0; i < fg.size(); ++i) {
    const double p = pred.values()[i];
    if (fg[i]) {
      fg_sum += p;
      fg_sq += p * p;
      ++fg_n;
    } else {
      bg_sum += 1.0 - p;
      bg_sq += (1.0 - p) * (1.0 - p);
    }
  }
  const std::size_t bg_n = fg.size() - fg_n;
  const double u = static_cast<double>(fg_n) / static_cast<double>(fg.size());
  return u * object_score(fg_sum, fg_sq, fg_n) + (1.0 - u) * object_score(bg_sum, bg_sq, bg_n);
}

double block_ssim(const Map2d& pred, const std::vector<bool>& fg, std::size_t r0, std::size_t r1, std::size_t c0,
                  std::size_t c1) {
  const double n = static_cast<double>((r1 - r0) * (c1 - c0));
  double x = 0.0, y = 0.0;
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t c = c0; c < c1; ++c) {
      x += pred(r, c);
      y += fg[r * pred.cols() + c] ? 1.0 : 0.0;
    }
  }
  x /= n;
  y /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t c = c0; c < c1; ++c) {
      const double dx = pred(r, c) - x;
      const double dy = (fg[r * pred.cols() + c] ? 1.0 : 0.0) - y;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  }
  sxx /= n - 1.0 + kEps;
  syy /= n - 1.0 + kEps;
  sxy /= n - 1.0 + kEps;
  const double alpha = 4.0 * x * y * sxy;
  const double beta = (x * x + y * y) * (sxx + syy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

double s_region(const Map2d& pred, const std::vector<bool>& fg) {
  const std::size_t rows = pred.rows();
  const std::size_t cols = pred.cols();
  double total = 0.0, row_acc = 0.0, col_acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!fg[r * cols + c]) continue;
      total += 1.0;
      row_acc += static_cast<double>(r + 1);
      col_acc += static_cast<double>(c + 1);
    }
  }
  // Split sizes: the top-left block spans y rows and x columns.
  const auto x = static_cast<std::size_t>(std::round(col_acc / total));
  const auto y = static_cast<std::size_t>(std::round(row_acc / total));
  const double area = static_cast<double>(rows * cols);
  const double w1 = static_cast<double>(x * y) / area;
  const double w2 = static_cast<double>((cols - x) * y) / area;
  const double w3 = static_cast<double>(x * (rows - y)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;

  const std::array<std::array<std::size_t, 4>, 4> blocks{{
      {0, y, 0, x},
      {0, y, x, cols},
      {y, rows, 0, x},
      {y, rows, x, cols},
  }};
  const std::array<double, 4> weights{w1, w2, w3, w4};
  double q = 0.0;
  for (std::size_t b = 0; b < 4; ++b) {
    const auto& [r0, r1, c0, c1] = blocks[b];
    if (r0 == r1 || c0 == c1) continue;
    q += weights[b] * block_ssim(pred, fg, r0, r1, c0, c1);
  }
  return q;
}

double enhanced_term(double a, double b) {
  const double align = 2.0 * a * b / (a * a + b * b + kEps);
  return (align + 1.0) * (align + 1.0) / 4.0;
}

std::array<double, 2 * kGaussRadius + 1> gaussian_row() {
  std::array<double, 2 * kGaussRadius + 1> g{};
  for (int i = -kGaussRadius; i <= kGaussRadius; ++i) {
    g[static_cast<std::size_t>(i + kGaussRadius)] = std::exp(-(i * i) / (2.0 * kGaussSigma * kGaussSigma));
  }
  return g;
}

}  // namespace

Map2d binarize_gt(const Map2d& gt) {
  Map2d out(gt.rows(), gt.cols());
  for (std::size_t i = 0; i < gt.size(); ++i) out.values()[i] = gt.values()[i] >= kGtBinarizeThreshold ? 1.0 : 0.0;
  return out;
}

double mae(const Map2d& pred, const Map2d& gt) {
  check_pair(pred, gt, "mae");
  check_pair(gt, pred, "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred.values()[i] - gt.values()[i]);
  return acc / static_cast<double>(pred.size());
}

double s_measure(const Map2d& pred, const Map2d& gt, double alpha) {
  check_pair(pred, gt, "s_measure");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("s_measure: alpha outside [0,1]");
  const auto fg = foreground(gt);
  const auto fg_n = static_cast<std::size_t>(std::count(fg.begin(), fg.end(), true));
  if (fg_n == 0) return 1.0 - pred.mean();
  if (fg_n == fg.size()) return pred.mean();
  const double q = alpha * s_object(pred, fg) + (1.0 - alpha) * s_region(pred, fg);
  return std::clamp(q, 0.0, 1.0);
}

double e_measure(const Map2d& pred, const Map2d& gt) {
  check_pair(pred, gt, "e_measure");
  const auto fg = foreground(gt);
  std::vector<double> fg_vals;
  std::vector<double> bg_vals;
  for (std::size_t i = 0; i < fg.size(); ++i) (fg[i] ? fg_vals : bg_vals).push_back(pred.values()[i]);
  std::sort(fg_vals.begin(), fg_vals.end());
  std::sort(bg_vals.begin(), bg_vals.end());

  const double n = static_cast<double>(fg.size());
  const double n_fg = static_cast<double>(fg_vals.size());
  const double gt_mean = n_fg / n;
  double total = 0.0;
  for (std::size_t t = 0; t < kEnhancedThresholds; ++t) {
    const double thr = (static_cast<double>(t) + 0.5) / static_cast<double>(kEnhancedThresholds);
    const auto above = [thr](const std::vector<double>& v) {
      return static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), thr));
    };
    const double tp = above(fg_vals);  // pred 1, gt 1
    const double fp = above(bg_vals);  // pred 1, gt 0
    const double fn = n_fg - tp;
    const double tn = (n - n_fg) - fp;
    double score;
    if (fg_vals.empty()) {
      score = tn / n;
    } else if (bg_vals.empty()) {
      score = tp / n;
    } else {
      const double m = (tp + fp) / n;
      const double g1 = 1.0 - gt_mean, g0 = -gt_mean;
      const double p1 = 1.0 - m, p0 = -m;
      score = (tp * enhanced_term(g1, p1) + fp * enhanced_term(g0, p1) + fn * enhanced_term(g1, p0) +
               tn * enhanced_term(g0, p0)) /
              n;
    }
    total += score;
  }
  return std::clamp(total / static_cast<double>(kEnhancedThresholds), 0.0, 1.0);
}

DistanceTransform distance_transform(const Map2d& mask) {
  const std::size_t rows = mask.rows();
  const std::size_t cols = mask.cols();
  const auto fg = foreground(mask);
  if (std::find(fg.begin(), fg.end(), true) == fg.end()) throw DataError("distance_transform: no foreground");

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  // Nearest foreground row in the same column, at or above / at or below.
  std::vector<std::size_t> up(rows * cols, kNone);
  std::vector<std::size_t> down(rows * cols, kNone);
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t last = kNone;
    for (std::size_t r = 0; r < rows; ++r) {
      if (fg[r * cols + c]) last = r;
      up[r * cols + c] = last;
    }
    last = kNone;
    for (std::size_t r = rows; r-- > 0;) {
      if (fg[r * cols + c]) last = r;
      down[r * cols + c] = last;
    }
  }

  DistanceTransform out{std::vector<double>(rows * cols), std::vector<std::size_t>(rows * cols)};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t best_d2 = kNone;
      std::size_t best_idx = kNone;
      const auto consider = [&](std::size_t cc) {
        const std::size_t dc = cc > c ? cc - c : c - cc;
        for (std::size_t rr : {up[r * cols + cc], down[r * cols + cc]}) {
          if (rr == kNone) continue;
          const std::size_t dr = rr > r ? rr - r : r - rr;
          const std::size_t d2 = dr * dr + dc * dc;
          const std::size_t idx = rr * cols + cc;
          if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
            best_d2 = d2;
            best_idx = idx;
          }
        }
      };
      for (std::size_t dc = 0; dc < cols; ++dc) {
        if (best_d2 != kNone && dc * dc > best_d2) break;
        if (dc <= c) consider(c - dc);
        if (dc > 0 && c + dc < cols) consider(c + dc);
      }
      out.distance[r * cols + c] = std::sqrt(static_cast<double>(best_d2));
      out.nearest[r * cols + c] = best_idx;
    }
  }
  return out;
}

double weighted_f(const Map2d& pred, const Map2d& gt) {
  check_pair(pred, gt, "weighted_f");
  const std::size_t rows = pred.rows();
  const std::size_t cols = pred.cols();
  const auto fg = foreground(gt);
  if (std::find(fg.begin(), fg.end(), true) == fg.end()) return 0.0;

  std::vector<double> err(pred.size());
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::abs(pred.values()[i] - (fg[i] ? 1.0 : 0.0));

  const DistanceTransform dt = distance_transform(binarize_gt(gt));
  std::vector<double> err_t(err.size());
  for (std::size_t i = 0; i < err.size(); ++i) err_t[i] = fg[i] ? err[i] : err[dt.nearest[i]];

  // Separable normalized Gaussian, zero padding.
  const auto g = gaussian_row();
  std::array<std::array<double, g.size()>, g.size()> kernel{};
  double k_sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) k_sum += g[i] * g[j];
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) kernel[i][j] = g[i] * g[j] / k_sum;
  }

  const auto ir = static_cast<std::ptrdiff_t>(rows);
  const auto ic = static_cast<std::ptrdiff_t>(cols);
  double ew_fg = 0.0, ew_bg = 0.0, n_fg = 0.0;
  for (std::ptrdiff_t r = 0; r < ir; ++r) {
    for (std::ptrdiff_t c = 0; c < ic; ++c) {
      const auto i = static_cast<std::size_t>(r * ic + c);
      if (fg[i]) {
        double ea = 0.0;
        for (int di = -kGaussRadius; di <= kGaussRadius; ++di) {
          const std::ptrdiff_t rr = r + di;
          if (rr < 0 || rr >= ir) continue;
          for (int dj = -kGaussRadius; dj <= kGaussRadius; ++dj) {
            const std::ptrdiff_t cc = c + dj;
            if (cc < 0 || cc >= ic) continue;
            ea += kernel[static_cast<std::size_t>(di + kGaussRadius)][static_cast<std::size_t>(dj + kGaussRadius)] *
                  err_t[static_cast<std::size_t>(rr * ic + cc)];
          }
        }
        ew_fg += std::min(err[i], ea);
        n_fg += 1.0;
      } else {
        const double importance = 2.0 - std::exp(std::log(0.5) / 5.0 * dt.distance[i]);
        ew_bg += err[i] * importance;
      }
    }
  }
  const double tp_w = n_fg - ew_fg;
  const double recall = 1.0 - ew_fg / n_fg;
  const double precision = tp_w / (kEps + tp_w + ew_bg);
  return std::clamp(2.0 * recall * precision / (kEps + recall + precision), 0.0, 1.0);
}

ImageScores evaluate(std::string id, const Map2d& pred, const Map2d& gt) {
  if (gt.empty()) throw DataError(fmt::format("'{}': empty ground truth", id));
  const Map2d p = (pred.rows() == gt.rows() && pred.cols() == gt.cols()) ? pred
                                                                          : resize_bilinear(pred, gt.rows(), gt.cols());
  const Map2d g = binarize_gt(gt);
  ImageScores s;
  s.id = std::move(id);
  s.s_alpha = s_measure(p, g);
  s.e_xi = e_measure(p, g);
  s.f_beta_w = weighted_f(p, g);
  s.mae = mae(p, g);
  return s;
}

Map2d load_map(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return read_pgm(path);
  if (ext != ".rsgt") throw DataError(fmt::format("'{}': unsupported map format", path.string()));

  const Tensor t = read_tensor(path);
  const auto dims = t.dims();
  std::size_t rows = 0, cols = 0;
  if (t.rank() == 2) {
    rows = dims[0];
    cols = dims[1];
  } else if (t.rank() == 3 && dims[0] == 1) {
    rows = dims[1];
    cols = dims[2];
  } else if (t.rank() == 3 && dims[2] == 1) {
    rows = dims[0];
    cols = dims[1];
  } else {
    throw DataError(fmt::format("'{}': map tensor must be HxW", path.string()));
  }
  if (rows == 0 || cols == 0) throw DataError(fmt::format("'{}': empty map", path.string()));
  Map2d out(rows, cols);
  if (t.dtype() == DType::u8) {
    const auto v = t.u8();
    for (std::size_t i = 0; i < v.size(); ++i) out.values()[i] = static_cast<double>(v[i]) / 255.0;
  } else {
    const auto v = t.f32();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) throw DataError(fmt::format("'{}': non-finite value", path.string()));
      out.values()[i] = v[i];
    }
  }
  return out;
}

namespace {

std::map<std::string, std::filesystem::path> maps_by_stem(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(fmt::format("'{}': not a directory", dir.string()));
  std::map<std::string, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext != ".rsgt" && ext != ".pgm") continue;
    const auto stem = entry.path().stem().string();
    if (!out.emplace(stem, entry.path()).second) {
      throw DataError(fmt::format("'{}': several files share stem '{}'", dir.string(), stem));
    }
  }
  return out;
}

}  // namespace

MetricsReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                           std::size_t threads) {
  const auto preds = maps_by_stem(pred_dir);
  const auto gts = maps_by_stem(gt_dir);
  for (const auto& [stem, path] : preds) {
    if (!gts.contains(stem)) throw DataError(fmt::format("no ground truth for prediction '{}'", stem));
  }
  for (const auto& [stem, path] : gts) {
    if (!preds.contains(stem)) throw DataError(fmt::format("no prediction for ground truth '{}'", stem));
  }
  if (preds.empty()) throw DataError("no prediction/ground-truth pairs found");

  std::vector<std::pair<std::string, std::filesystem::path>> items(preds.begin(), preds.end());
  MetricsReport report;
  report.per_image.resize(items.size());
  parallel_for(items.size(), resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& [stem, pred_path] = items[i];
      report.per_image[i] = evaluate(stem, load_map(pred_path), load_map(gts.at(stem)));
    }
  });

  report.aggregate.id = "mean";
  for (const ImageScores& s : report.per_image) {
    report.aggregate.s_alpha += s.s_alpha;
    report.aggregate.e_xi += s.e_xi;
    report.aggregate.f_beta_w += s.f_beta_w;
    report.aggregate.mae += s.mae;
  }
  const double n = static_cast<double>(report.per_image.size());
  report.aggregate.s_alpha /= n;
  report.aggregate.e_xi /= n;
  report.aggregate.f_beta_w /= n;
  report.aggregate.mae /= n;
  return report;
}

namespace {

nlohmann::ordered_json scores_json(const ImageScores& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["s_alpha"] = s.s_alpha;
  j["e_xi"] = s.e_xi;
  j["f_beta_w"] = s.f_beta_w;
  j["mae"] = s.mae;
  return j;
}

}  // namespace

std::string report_json(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  auto rows = nlohmann::ordered_json::array();
  for (const ImageScores& s : report.per_image) rows.push_back(scores_json(s));
  doc["per_image"] = std::move(rows);
  doc["aggregate"] = scores_json(report.aggregate);
  return doc.dump(2) + "\n";
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "id,s_alpha,e_xi,f_beta_w,mae\n";
  const auto row = [&](const ImageScores& s) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.id, s.s_alpha, s.e_xi, s.f_beta_w, s.mae);
  };
  for (const ImageScores& s : report.per_image) row(s);
  row(report.aggregate);
}

}  // namespace ragseg
