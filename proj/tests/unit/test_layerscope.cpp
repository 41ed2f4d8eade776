#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "../oracles.hpp"
#include "helpers.hpp"
#include "lwfa/error.hpp"
#include "lwfa/scope/layerscope.hpp"

using namespace lwfa;
using namespace lwfa::scope;

namespace {

nn::ActivationTrace trace_of(std::vector<std::vector<float>> taps) { return {std::move(taps)}; }

SimilarityProfile profile_of(std::size_t first, std::vector<double> v) {
  return {0, {first, first + v.size() - 1}, std::move(v)};
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(Cosine, HandExamples) {
  const std::vector<float> a{1, 2, 2};
  const std::vector<double> b{2, 1, 2};
  EXPECT_NEAR(cosine_similarity(a, b), 8.0 / 9.0, 1e-15);
  EXPECT_EQ(cosine_similarity(std::vector<float>{1, 0}, std::vector<double>{0, 3}), 0.0);
  EXPECT_EQ(cosine_similarity(std::vector<float>{0, 0}, std::vector<double>{1, 3}), 0.0);
  EXPECT_THROW(cosine_similarity(std::vector<float>{1}, std::vector<double>{1, 2}), DataError);
}

TEST(Cosine, SelfSimilarityIsOneAndRangeHolds) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> b(1 + i % 40);
    for (auto& x : b) x = static_cast<float>(u(rng));
    const auto a = to_float(b);
    if (std::all_of(a.begin(), a.end(), [](float x) { return x == 0.0f; })) continue;
    EXPECT_EQ(cosine_similarity(a, b), 1.0);
    std::vector<double> c(b.size());
    for (auto& x : c) x = u(rng);
    const double cs = cosine_similarity(a, c);
    EXPECT_GE(cs, -1.0);
    EXPECT_LE(cs, 1.0);
  }
}

TEST(Centroids, SmallCases) {
  const std::vector<nn::ActivationTrace> one{trace_of({{1, 2}, {3, 4, 5}})};
  const auto c1 = compute_centroids(one, 2, {1, 2});
  EXPECT_EQ(c1.at(1), (std::vector<double>{1, 2}));
  EXPECT_EQ(c1.at(2), (std::vector<double>{3, 4, 5}));
  EXPECT_EQ(c1.sample_count, 1u);

  const std::vector<nn::ActivationTrace> two{trace_of({{1, 0}}), trace_of({{0, 1}})};
  EXPECT_EQ(compute_centroids(two, 0, {1, 1}).at(1), (std::vector<double>{0.5, 0.5}));
}

TEST(Centroids, Errors) {
  EXPECT_THROW(compute_centroids({}, 0, {1, 1}), DataError);
  const std::vector<nn::ActivationTrace> mixed{trace_of({{1, 0}}), trace_of({{0, 1, 2}})};
  EXPECT_THROW(compute_centroids(mixed, 0, {1, 1}), DataError);
  const std::vector<nn::ActivationTrace> short_trace{trace_of({{1, 0}})};
  EXPECT_THROW(compute_centroids(short_trace, 0, {1, 2}), DataError);
}

TEST(Centroids, MatchOracleOnRandomInputs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::vector<std::size_t> widths{1 + trial % 7, 8, 3 + trial % 5};
    std::vector<nn::ActivationTrace> traces;
    for (int i = 0; i < 1 + trial % 9; ++i) traces.push_back(test::random_trace(widths, rng, -2.0f, 2.0f));
    const auto c = compute_centroids(traces, 0, {1, 3});
    for (std::size_t l = 1; l <= 3; ++l) {
      const auto ref = oracle::centroid(traces, l);
      for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_NEAR(c.at(l)[j], ref[j], 1e-12);
    }
  }
}

TEST(Centroids, DuplicatingTheListKeepsTheCentroid) {
  std::mt19937_64 rng(12);
  std::vector<nn::ActivationTrace> traces;
  for (int i = 0; i < 5; ++i) traces.push_back(test::random_trace({8, 8}, rng));
  auto tripled = traces;
  for (int k = 0; k < 2; ++k) tripled.insert(tripled.end(), traces.begin(), traces.end());
  const auto a = compute_centroids(traces, 0, {1, 2});
  const auto b = compute_centroids(tripled, 0, {1, 2});
  for (std::size_t l = 1; l <= 2; ++l) {
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(a.at(l)[j], b.at(l)[j], 1e-12);
  }
}

TEST(LayerwiseCosine, MatchesOracleAndIsScaleInvariant) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<float> scale(0.01f, 1000.0f);
  for (int trial = 0; trial < 300; ++trial) {
    const std::vector<std::size_t> widths{4, 6, 5, 3};
    std::vector<nn::ActivationTrace> traces;
    for (int i = 0; i < 4; ++i) traces.push_back(test::random_trace(widths, rng));
    const auto cents = compute_centroids(traces, 1, {2, 4});
    auto probe = test::random_trace(widths, rng, -1.0f, 1.0f);
    const auto rec = layerwise_cosine(probe, cents);
    ASSERT_EQ(rec.range, (LayerRange{2, 4}));
    for (std::size_t l = 2; l <= 4; ++l) EXPECT_NEAR(rec.at(l), oracle::cosine(probe.taps[l - 1], cents.at(l)), 1e-12);

    const float c = scale(rng);
    for (auto& tap : probe.taps) {
      for (auto& v : tap) v *= c;
    }
    const auto scaled = layerwise_cosine(probe, cents);
    for (std::size_t l = 2; l <= 4; ++l) EXPECT_NEAR(scaled.at(l), rec.at(l), 1e-6);
  }
}

TEST(LayerwiseCosine, WidthMismatch) {
  const std::vector<nn::ActivationTrace> traces{trace_of({{1, 2}, {1, 2}})};
  const auto cents = compute_centroids(traces, 0, {1, 2});
  EXPECT_THROW(layerwise_cosine(trace_of({{1, 2}, {1, 2, 3}}), cents), DataError);
  EXPECT_THROW(layerwise_cosine(trace_of({{1, 2}}), cents), DataError);
}

TEST(MeanProfile, Arithmetic) {
  const std::vector<SimilarityRecord> one{{{1, 2}, {0.2, 0.8}}};
  EXPECT_EQ(mean_profile(one, 3).values, (std::vector<double>{0.2, 0.8}));
  EXPECT_EQ(mean_profile(one, 3).cls, 3u);
  const std::vector<SimilarityRecord> two{{{1, 2}, {0.2, 0.8}}, {{1, 2}, {0.4, 0.6}}};
  const auto p = mean_profile(two, 0);
  EXPECT_NEAR(p.at(1), 0.3, 1e-15);
  EXPECT_NEAR(p.at(2), 0.7, 1e-15);
  EXPECT_THROW(mean_profile({}, 0), DataError);
  const std::vector<SimilarityRecord> mixed{{{1, 2}, {0.2, 0.8}}, {{2, 3}, {0.4, 0.6}}};
  EXPECT_THROW(mean_profile(mixed, 0), DataError);
}

TEST(MeanProfile, MatchesOracle) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SimilarityRecord> recs;
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 100; ++i) {
      std::vector<double> v(5);
      for (auto& x : v) x = u(rng);
      rows.push_back(v);
      recs.push_back({{5, 9}, v});
    }
    const auto p = mean_profile(recs, 0);
    const auto ref = oracle::mean_rows(rows);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(p.values[j], ref[j], 1e-12);
  }
}

TEST(Loi, DominantJump) {
  EXPECT_EQ(identify_loi(profile_of(5, {0.20, 0.30, 0.35, 0.90, 0.95})), 8u);
}

TEST(Loi, UniformIncrementsKeepTheFirstLayer) {
  EXPECT_EQ(identify_loi(profile_of(5, {0.0, 0.25, 0.5, 0.75, 1.0})), 6u);
  EXPECT_EQ(identify_loi(profile_of(3, {0.5, 0.5, 0.5})), 4u);
}

TEST(Loi, MatchesExhaustiveScan) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(2 + trial % 9);
    // every other trial uses a coarse grid so ties actually occur
    for (auto& x : v) x = trial % 2 ? u(rng) : coarse(rng) * 0.25;
    const std::size_t first = 1 + trial % 6;
    EXPECT_EQ(identify_loi(profile_of(first, v)), oracle::loi(v, first));
  }
}

TEST(Loi, NeedsTwoLayers) { EXPECT_THROW(identify_loi(profile_of(4, {0.5})), DataError); }

TEST(Ranges, AnalysisAndSearch) {
  EXPECT_EQ(loi_search_range(10), (LayerRange{5, 10}));
  EXPECT_EQ(analysis_range(10), (LayerRange{3, 10}));
  EXPECT_EQ(loi_search_range(6), (LayerRange{3, 6}));
  EXPECT_EQ(analysis_range(6), (LayerRange{1, 6}));
  EXPECT_EQ(analysis_range(4), (LayerRange{1, 4}));
  EXPECT_THROW(analysis_range(3), DataError);
}

TEST(Profiles, ExportFormat) {
  const auto benign = profile_of(5, {0.9, 0.8, 0.95, 0.97, 0.99});
  const auto poisoned = profile_of(5, {0.85, 0.5, 0.6, 0.9, 0.98});
  const auto text = format_profiles(benign, poisoned);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "layer,benign_mean_cs,poisoned_mean_cs,diff");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::size_t layer;
    double b, p, d;
    ASSERT_EQ(std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf", &layer, &b, &p, &d), 4);
    EXPECT_EQ(layer, 5 + rows);
    EXPECT_NEAR(d, b - p, 2e-6);
    ++rows;
  }
  EXPECT_EQ(rows, 5u);
  EXPECT_THROW(format_profiles(benign, profile_of(4, {1, 1, 1, 1, 1})), DataError);

  const auto path = std::filesystem::temp_directory_path() / "lwfa_profiles_test.csv";
  export_profiles(benign, poisoned, path);
  std::ifstream f(path);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f), {}), text);
  std::filesystem::remove(path);
}
