#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "metrics_oracle.hpp"
#include "ragseg/error.hpp"
#include "ragseg/metrics.hpp"
#include "ragseg/pgm.hpp"
#include "ragseg/tensor_io.hpp"

using namespace ragseg;

namespace {

Map2d quarter_mask(std::size_t h, std::size_t w) {
  Map2d m(h, w);
  for (std::size_t r = h / 4; r < 3 * h / 4; ++r) {
    for (std::size_t c = w / 4; c < 3 * w / 4; ++c) m(r, c) = 1.0;
  }
  return m;
}

}  // namespace

TEST(Metrics, PerfectPrediction) {
  fixtures::Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const Map2d gt = fixtures::random_mask(rng, 40, 50);
    EXPECT_NEAR(s_measure(gt, gt), 1.0, 1e-6);
    EXPECT_NEAR(e_measure(gt, gt), 1.0, 1e-6);
    EXPECT_NEAR(weighted_f(gt, gt), 1.0, 1e-6);
    EXPECT_EQ(mae(gt, gt), 0.0);
  }
}

TEST(Metrics, AllZeroPrediction) {
  const Map2d gt = quarter_mask(40, 40);
  EXPECT_DOUBLE_EQ(gt.mean(), 0.25);
  const Map2d zero(40, 40);
  EXPECT_EQ(mae(zero, gt), 0.25);
  EXPECT_EQ(weighted_f(zero, gt), 0.0);
}

TEST(Metrics, DegenerateGroundTruth) {
  fixtures::Rng rng(2);
  Map2d pred(20, 20);
  for (double& v : pred.values()) v = fixtures::uniform(rng);
  EXPECT_NEAR(s_measure(pred, Map2d(20, 20)), 1.0 - pred.mean(), 1e-12);
  EXPECT_NEAR(s_measure(pred, Map2d(20, 20, 1.0)), pred.mean(), 1e-12);
  EXPECT_EQ(weighted_f(pred, Map2d(20, 20)), 0.0);
  EXPECT_NEAR(e_measure(Map2d(20, 20), Map2d(20, 20)), 1.0, 1e-12);
}

TEST(Metrics, InvertedPredictionScoresLow) {
  Map2d gt(32, 32);
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c < 16; ++c) gt(r, c) = 1.0;
  }
  Map2d inv = gt;
  for (double& v : inv.values()) v = 1.0 - v;
  EXPECT_LT(e_measure(inv, gt), 0.1);
}

TEST(Metrics, MatchesReferenceImplementations) {
  fixtures::Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const std::size_t h = fixtures::pick(rng, 8, 48), w = fixtures::pick(rng, 8, 48);
    const Map2d gt = fixtures::random_mask(rng, h, w);
    const Map2d pred = fixtures::noisy_prediction(rng, gt, 0.4);
    EXPECT_NEAR(mae(pred, gt), oracle::mae(pred, gt), 1e-9);
    EXPECT_NEAR(s_measure(pred, gt), oracle::s_measure(pred, gt), 1e-6);
    EXPECT_NEAR(e_measure(pred, gt), oracle::e_measure(pred, gt), 1e-6);
    EXPECT_NEAR(weighted_f(pred, gt), oracle::weighted_f(pred, gt), 1e-6);
  }
}

TEST(Metrics, FixedEightByEight) {
  Map2d gt(8, 8), pred(8, 8);
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 8; ++c) {
      gt(r, c) = (r >= 2 && r < 6 && c >= 1 && c < 5) ? 1.0 : 0.0;
      pred(r, c) = static_cast<double>((r * 8 + c) % 11) / 10.0;
    }
  }
  EXPECT_NEAR(s_measure(pred, gt), oracle::s_measure(pred, gt), 1e-6);
  EXPECT_NEAR(e_measure(pred, gt), oracle::e_measure(pred, gt), 1e-6);
  EXPECT_NEAR(weighted_f(pred, gt), oracle::weighted_f(pred, gt), 1e-6);
}

TEST(Metrics, RangeAndSymmetryProperties) {
  fixtures::Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const std::size_t h = fixtures::pick(rng, 4, 40), w = fixtures::pick(rng, 4, 40);
    Map2d a(h, w), b(h, w);
    for (double& v : a.values()) v = fixtures::uniform(rng);
    for (double& v : b.values()) v = fixtures::uniform(rng) < 0.3 ? 1.0 : 0.0;
    for (double s : {s_measure(a, b), e_measure(a, b), weighted_f(a, b), mae(a, b)}) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
    Map2d c(h, w);
    for (double& v : c.values()) v = fixtures::uniform(rng) < 0.5 ? 1.0 : 0.0;
    EXPECT_EQ(mae(b, c), mae(c, b));
  }
}

TEST(Metrics, ArgumentOrderMatters) {
  fixtures::Rng rng(5);
  const Map2d gt = fixtures::random_mask(rng, 30, 30, 3);
  const Map2d pred = fixtures::noisy_prediction(rng, gt, 0.5);
  const Map2d pred_bin = binarize_gt(pred);
  Map2d soft = pred;
  // Swapping a soft prediction with a binary mask must change S, E and F.
  EXPECT_NE(s_measure(soft, gt), s_measure(gt, soft));
  EXPECT_NE(e_measure(soft, gt), e_measure(gt, soft));
  EXPECT_NE(weighted_f(soft, gt), weighted_f(gt, soft));
  EXPECT_EQ(mae(pred_bin, gt), mae(gt, pred_bin));
}

TEST(Metrics, DistanceTransformMatchesBruteForce) {
  fixtures::Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const std::size_t h = fixtures::pick(rng, 1, 30), w = fixtures::pick(rng, 1, 30);
    Map2d m(h, w);
    for (double& v : m.values()) v = fixtures::uniform(rng) < 0.05 ? 1.0 : 0.0;
    m.values()[fixtures::pick(rng, 0, m.size() - 1)] = 1.0;
    const auto dt = distance_transform(m);
    std::vector<double> dist;
    std::vector<std::size_t> idx;
    oracle::brute_edt(oracle::to_grid(m), dist, idx);
    for (std::size_t j = 0; j < m.size(); ++j) {
      EXPECT_DOUBLE_EQ(dt.distance[j], dist[j]);
      EXPECT_EQ(dt.nearest[j], idx[j]);
    }
  }
  EXPECT_THROW(distance_transform(Map2d(3, 3)), DataError);
}

TEST(Metrics, Rejects) {
  EXPECT_THROW(mae(Map2d(2, 2), Map2d(2, 3)), DataError);
  EXPECT_THROW(s_measure(Map2d(2, 2, 1.5), Map2d(2, 2)), DataError);
}

TEST(Pgm, RoundTripAndComments) {
  const auto dir = fixtures::temp_dir("pgm");
  Map2d m(3, 4);
  for (std::size_t i = 0; i < m.size(); ++i) m.values()[i] = static_cast<double>(i) / 11.0;
  write_pgm(dir / "a.pgm", m);
  const Map2d back = read_pgm(dir / "a.pgm");
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(back.values()[i], std::floor(m.values()[i] * 255.0 + 0.5) / 255.0);
  }
  {
    std::ofstream f(dir / "b.pgm", std::ios::binary);
    f << "P5\n# comment\n2 1\n# another\n15\n";
    f.put(static_cast<char>(15));
    f.put(static_cast<char>(0));
  }
  const Map2d b = read_pgm(dir / "b.pgm");
  EXPECT_EQ(b.rows(), 1u);
  EXPECT_EQ(b.values()[0], 1.0);
  EXPECT_EQ(b.values()[1], 0.0);
  {
    std::ofstream f(dir / "c.pgm", std::ios::binary);
    f << "P2\n2 1\n255\n0 0\n";
  }
  EXPECT_THROW(read_pgm(dir / "c.pgm"), FormatError);
  {
    std::ofstream f(dir / "d.pgm", std::ios::binary);
    f << "P5\n4 4\n255\n";
    f.put('x');
  }
  EXPECT_THROW(read_pgm(dir / "d.pgm"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(EvaluateDir, PerfectToySet) {
  const auto pred = fixtures::temp_dir("eval_pred");
  const auto gt = fixtures::temp_dir("eval_gt");
  fixtures::Rng rng(7);
  for (const char* id : {"c", "a", "b"}) {
    const Map2d m = fixtures::random_mask(rng, 30, 36);
    write_pgm(gt / (std::string(id) + ".pgm"), m);
    std::vector<float> v(m.values().begin(), m.values().end());
    write_tensor(pred / (std::string(id) + ".rsgt"), Tensor::from_f32({30, 36}, v));
  }
  const MetricsReport r = evaluate_dir(pred, gt, 2);
  ASSERT_EQ(r.per_image.size(), 3u);
  EXPECT_EQ(r.per_image[0].id, "a");
  EXPECT_EQ(r.per_image[2].id, "c");
  EXPECT_NEAR(r.aggregate.s_alpha, 1.0, 1e-6);
  EXPECT_NEAR(r.aggregate.e_xi, 1.0, 1e-6);
  EXPECT_NEAR(r.aggregate.f_beta_w, 1.0, 1e-6);
  EXPECT_EQ(r.aggregate.mae, 0.0);

  std::ostringstream csv;
  write_report_csv(csv, r);
  EXPECT_EQ(csv.str().rfind("id,s_alpha,e_xi,f_beta_w,mae\na,", 0), 0u);
  EXPECT_NE(report_json(r).find("\"aggregate\""), std::string::npos);
  std::filesystem::remove_all(pred);
  std::filesystem::remove_all(gt);
}

TEST(EvaluateDir, ComposesPerImageOracles) {
  const auto pred = fixtures::temp_dir("eval_pred2");
  const auto gt = fixtures::temp_dir("eval_gt2");
  fixtures::Rng rng(8);
  std::vector<Map2d> preds, gts;
  for (int i = 0; i < 3; ++i) {
    gts.push_back(fixtures::random_mask(rng, 24, 24));
    preds.push_back(fixtures::noisy_prediction(rng, gts.back(), 0.3));
    write_pgm(gt / ("img" + std::to_string(i) + ".pgm"), gts.back());
    std::vector<float> v(preds.back().values().begin(), preds.back().values().end());
    for (float& x : v) x = static_cast<float>(x);
    write_tensor(pred / ("img" + std::to_string(i) + ".rsgt"), Tensor::from_f32({24, 24}, v));
    for (std::size_t j = 0; j < v.size(); ++j) preds.back().values()[j] = v[j];
  }
  const MetricsReport r = evaluate_dir(pred, gt);
  double s = 0, e = 0, f = 0, m = 0;
  for (int i = 0; i < 3; ++i) {
    s += oracle::s_measure(preds[i], gts[i]);
    e += oracle::e_measure(preds[i], gts[i]);
    f += oracle::weighted_f(preds[i], gts[i]);
    m += oracle::mae(preds[i], gts[i]);
  }
  EXPECT_NEAR(r.aggregate.s_alpha, s / 3, 1e-6);
  EXPECT_NEAR(r.aggregate.e_xi, e / 3, 1e-6);
  EXPECT_NEAR(r.aggregate.f_beta_w, f / 3, 1e-6);
  EXPECT_NEAR(r.aggregate.mae, m / 3, 1e-6);
  std::filesystem::remove_all(pred);
  std::filesystem::remove_all(gt);
}

TEST(EvaluateDir, ResizesAndRejects) {
  const auto pred = fixtures::temp_dir("eval_pred3");
  const auto gt = fixtures::temp_dir("eval_gt3");
  write_pgm(gt / "x.pgm", Map2d(20, 20, 1.0));
  write_tensor(pred / "x.rsgt", Tensor::from_f32({10, 10}, std::vector<float>(100, 1.0f)));
  EXPECT_EQ(evaluate_dir(pred, gt).aggregate.mae, 0.0);
  write_pgm(gt / "y.pgm", Map2d(20, 20, 1.0));
  EXPECT_THROW(evaluate_dir(pred, gt), DataError);
  std::filesystem::remove(gt / "y.pgm");
  std::filesystem::remove(gt / "x.pgm");
  write_pgm(gt / "z.pgm", Map2d(20, 20, 1.0));
  EXPECT_THROW(evaluate_dir(pred, gt), DataError);
  std::filesystem::remove_all(pred);
  std::filesystem::remove_all(gt);
}
