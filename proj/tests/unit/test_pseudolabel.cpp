#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "misc_oracle.hpp"
#include "ragseg/error.hpp"
#include "ragseg/kmeans.hpp"
#include "ragseg/pseudolabel.hpp"
#include "search_oracle.hpp"

using namespace ragseg;

namespace {

QueryGrid random_grid(fixtures::Rng& rng, std::size_t g, std::size_t d) {
  return QueryGrid(fixtures::gaussian(rng, g * g * d), d, g, g * kPatchSize, g * kPatchSize);
}

}  // namespace

TEST(Upsample, ConstantsStayConstant) {
  const Map2d up = upsample(Map2d(16, 16, 0.42), 224, 224);
  for (double v : up.values()) EXPECT_DOUBLE_EQ(v, 0.42);
  const Map2d one = upsample(Map2d(1, 1, 0.7), 14, 28);
  for (double v : one.values()) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(Upsample, TwoByTwoRamp) {
  const Map2d g(2, 2, std::vector<double>{0, 1, 0, 1});
  const Map2d up = upsample(g, 4, 4);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_DOUBLE_EQ(up(r, 0), 0.0);
    EXPECT_DOUBLE_EQ(up(r, 1), 0.25);
    EXPECT_DOUBLE_EQ(up(r, 2), 0.75);
    EXPECT_DOUBLE_EQ(up(r, 3), 1.0);
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(up(r, c) + up(r, 3 - c), 1.0, 1e-15);
      EXPECT_NEAR(up(r, c), oracle::bilinear_at(g, 4, 4, r, c), 1e-15);
    }
  }
}

TEST(Upsample, MatchesClosedFormAndStaysInBounds) {
  fixtures::Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const std::size_t g = fixtures::pick(rng, 1, 9);
    Map2d grid(g, g);
    for (double& v : grid.values()) v = fixtures::uniform(rng);
    const std::size_t H = fixtures::pick(rng, 1, 60), W = fixtures::pick(rng, 1, 60);
    const Map2d up = upsample(grid, H, W);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) {
        EXPECT_NEAR(up(r, c), oracle::bilinear_at(grid, H, W, r, c), 1e-12);
        EXPECT_GE(up(r, c), grid.min());
        EXPECT_LE(up(r, c), grid.max());
      }
    }
  }
}

TEST(Threshold, StepKeepsSupraThresholdValues) {
  const Map2d m(1, 3, std::vector<double>{0.1, 0.3, 0.9});
  EXPECT_EQ(apply_threshold(m, ThresholdStrategy::step(3)), Map2d(1, 3, std::vector<double>{0, 0.3, 0.9}));
  const auto once = apply_threshold(m, ThresholdStrategy::step(5));
  EXPECT_EQ(apply_threshold(once, ThresholdStrategy::step(5)), once);
  EXPECT_EQ(apply_threshold(m, ThresholdStrategy::none()), m);
}

TEST(Threshold, Normalized) {
  const Map2d m(1, 3, std::vector<double>{0.2, 0.6, 1.0});
  const Map2d n = apply_threshold(m, ThresholdStrategy::normalized());
  EXPECT_NEAR(n.values()[0], 0.0, 1e-8);
  EXPECT_NEAR(n.values()[1], 0.5, 1e-8);
  EXPECT_NEAR(n.values()[2], 1.0, 1e-8);
  const Map2d flat = apply_threshold(Map2d(3, 3, 0.4), ThresholdStrategy::normalized());
  for (double v : flat.values()) EXPECT_EQ(v, 0.0);

  const Map2d unit(1, 3, std::vector<double>{0.0, 0.25, 1.0});
  const Map2d again = apply_threshold(unit, ThresholdStrategy::normalized());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(again.values()[i], unit.values()[i], 1e-8);
}

TEST(Threshold, Parse) {
  EXPECT_EQ(ThresholdStrategy::parse("T3").tau(), 0.3);
  EXPECT_EQ(ThresholdStrategy::parse("T3").name(), "T3");
  EXPECT_EQ(ThresholdStrategy::parse("T0").kind(), ThresholdStrategy::Kind::none);
  EXPECT_EQ(ThresholdStrategy::parse("TN").kind(), ThresholdStrategy::Kind::normalized);
  EXPECT_EQ(ThresholdStrategy::parse("0.25").tau(), 0.25);
  EXPECT_THROW(ThresholdStrategy::parse("T10"), std::invalid_argument);
  EXPECT_THROW(ThresholdStrategy::parse("1.5"), std::invalid_argument);
  EXPECT_THROW(ThresholdStrategy::parse("abc"), std::invalid_argument);
}

TEST(Generate, ConstantStoreGivesConstantLabel) {
  fixtures::Rng rng(2);
  const auto base = fixtures::random_store(rng, 20, 8, SimilarityMetric::inner_product);
  const ClusteredStore s(8, {base.centroids().begin(), base.centroids().end()}, std::vector<float>(20, 0.7f),
                         SimilarityMetric::inner_product, false);
  const auto label = generate(FlatIndex(s), random_grid(rng, 4, 8), 3);
  for (double v : label.values.values()) EXPECT_NEAR(v, 0.7, 1e-7);
}

TEST(Generate, TopThreeAverages) {
  const ClusteredStore s(1, {3, 2, 1, -5}, {1.0f, 0.5f, 0.0f, 0.9f}, SimilarityMetric::inner_product, false);
  const QueryGrid g({1.0f}, 1, 1, 14, 14);
  const auto label = generate(FlatIndex(s), g, 3);
  EXPECT_DOUBLE_EQ(label.grid(0, 0), 0.5);
  for (double v : label.values.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Generate, CentroidQueriesRecoverScoresAndMatchOracle) {
  fixtures::Rng rng(3);
  const auto s = fixtures::random_store(rng, 64, 10, SimilarityMetric::l2);
  const std::size_t g = 8;
  std::vector<float> tokens;
  std::vector<std::size_t> picks;
  for (std::size_t t = 0; t < g * g; ++t) {
    picks.push_back(fixtures::pick(rng, 0, 63));
    const auto c = s.centroid(picks.back());
    tokens.insert(tokens.end(), c.begin(), c.end());
  }
  const QueryGrid grid(tokens, 10, g, g * 14, g * 14);
  const auto label = generate(FlatIndex(s), grid, 1);
  for (std::size_t t = 0; t < g * g; ++t) {
    EXPECT_EQ(label.grid.values()[t], static_cast<double>(s.mask_scores()[picks[t]]));
  }

  const auto label3 = generate(s, grid, 3, SimilarityMetric::l2);
  for (std::size_t t = 0; t < g * g; ++t) {
    const auto hits = oracle::brute_topk(s, std::span<const float>(tokens).subspan(t * 10, 10), 3,
                                         SimilarityMetric::l2);
    double mean = 0.0;
    for (const auto& h : hits) mean += h.mask_score;
    EXPECT_DOUBLE_EQ(label3.grid.values()[t], mean / 3.0);
  }
}

TEST(Generate, ResolutionSweepAgainstSmallStore) {
  fixtures::Rng rng(4);
  const auto s = fixtures::random_store(rng, 128, 16, SimilarityMetric::inner_product);
  const FlatIndex index(s);
  for (std::size_t side : {112u, 224u, 448u, 784u, 896u}) {
    const std::size_t g = side / kPatchSize;
    const auto label = generate(index, random_grid(rng, g, 16), 1, 2);
    EXPECT_EQ(label.values.rows(), side);
    EXPECT_EQ(label.grid.rows(), g);
  }
}

TEST(Generate, TwoClusterCheckerboard) {
  fixtures::Rng rng(5);
  const std::size_t d = 16, n = 2000;
  const auto a = fixtures::gaussian(rng, d);
  const auto b = fixtures::gaussian(rng, d);
  const double sigma = 1e-3;
  std::vector<float> v;
  std::vector<float> m;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& centre = i % 2 == 0 ? a : b;
    const auto noise = fixtures::gaussian(rng, d, sigma);
    for (std::size_t t = 0; t < d; ++t) v.push_back(centre[t] + noise[t]);
    m.push_back(i % 2 == 0 ? 1.0f : 0.0f);
  }
  KMeansConfig cfg;
  cfg.k = 2;
  const auto store = cluster(RawDatabase(d, v, m, 1), cfg).store;

  const std::size_t g = 16;
  std::vector<float> tokens;
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t c = 0; c < g; ++c) {
      const auto& centre = (r + c) % 2 == 0 ? a : b;
      const auto noise = fixtures::gaussian(rng, d, sigma);
      for (std::size_t t = 0; t < d; ++t) tokens.push_back(centre[t] + noise[t]);
    }
  }
  const auto label = apply_threshold(generate(store, QueryGrid(tokens, d, g, g * 14, g * 14), 1, store.metric()),
                                     ThresholdStrategy::step(3));
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t c = 0; c < g; ++c) EXPECT_EQ(label.grid(r, c), (r + c) % 2 == 0 ? 1.0 : 0.0);
  }
  for (double x : label.values.values()) EXPECT_TRUE(x == 0.0 || x >= 0.3);
}

TEST(QueryGridTest, RejectsBadGeometry) {
  EXPECT_THROW(QueryGrid(std::vector<float>(4 * 3), 3, 2, 28, 27), DataError);
  EXPECT_THROW(QueryGrid(std::vector<float>(4 * 3), 3, 2, 30, 30), DataError);
  EXPECT_THROW(QueryGrid(std::vector<float>(5 * 3), 3, 2, 28, 28), DataError);
  fixtures::Rng rng(6);
  const auto s = fixtures::random_store(rng, 4, 3, SimilarityMetric::inner_product);
  const QueryGrid g(std::vector<float>(4 * 2, 1.0f), 2, 2, 28, 28);
  EXPECT_THROW(generate(FlatIndex(s), g, 1), DataError);
}
