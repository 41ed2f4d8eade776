#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "helpers.hpp"
#include "lwfa/error.hpp"
#include "lwfa/poison/dataset.hpp"
#include "lwfa/poison/dataset_io.hpp"
#include "lwfa/poison/poison.hpp"

using namespace lwfa;
using namespace lwfa::poison;

namespace {

SyntheticDatasetConfig small_config(std::uint64_t seed = 4) {
  SyntheticDatasetConfig c;
  c.train_count = 200;
  c.test_count = 60;
  c.seed = seed;
  return c;
}

ImageSample flat_image(float value, std::size_t label = 3) {
  return {nn::Tensor({3, 16, 16}, value), label};
}

std::size_t diff_count(const nn::Tensor& a, const nn::Tensor& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

}  // namespace

TEST(Dataset, DefaultShapeAndBalance) {
  const auto [train, test] = gen_synthetic_dataset(SyntheticDatasetConfig{});
  ASSERT_EQ(train.size(), 2000u);
  ASSERT_EQ(test.size(), 500u);
  std::vector<std::size_t> counts(10, 0);
  for (const auto& s : train) {
    ++counts.at(s.label);
    EXPECT_EQ(s.input.shape(), (nn::Shape{3, 16, 16}));
    check_pixel_range(s);
  }
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  EXPECT_GT(*lo, 0u);
  EXPECT_LE(*hi - *lo, 1u);
}

TEST(Dataset, DeterministicUnderSeed) {
  const auto a = gen_synthetic_dataset(small_config(4));
  const auto b = gen_synthetic_dataset(small_config(4));
  const auto c = gen_synthetic_dataset(small_config(5));
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.first, c.first);
}

TEST(Dataset, NoiseFreeSamplesAreTheirMotif) {
  const auto cfg = small_config();
  const auto [train, test] = gen_synthetic_dataset(cfg);
  for (std::size_t i = 0; i < train.size(); i += 17) {
    const auto& s = train[i];
    EXPECT_EQ(s.input, render_motif(cfg, s.label, motif_params(cfg, s.label, Split::train, i)));
  }
}

TEST(Dataset, NoiseStaysInRange) {
  auto cfg = small_config();
  cfg.noise_level = 0.3;
  const auto [train, test] = gen_synthetic_dataset(cfg);
  for (const auto& s : train) check_pixel_range(s);
  const auto clean = gen_synthetic_dataset(small_config());
  EXPECT_NE(train, clean.first);
}

TEST(Dataset, RejectsBadConfig) {
  auto cfg = small_config();
  cfg.image_size = 4;
  EXPECT_THROW(gen_synthetic_dataset(cfg), DataError);
  cfg = small_config();
  cfg.num_classes = 1;
  EXPECT_THROW(gen_synthetic_dataset(cfg), ConfigError);
}

TEST(PatchTrigger, WhiteSquareOnBlackImage) {
  const auto trig = TriggerSpec::square_patch(1, 16, 2, 1.0f);
  const ImageSample black{nn::Tensor({1, 16, 16}, 0.0f), 2};
  const auto out = apply_patch_trigger(black, trig);
  EXPECT_EQ(diff_count(out.input, black.input), 4u);
  for (std::size_t y = 14; y < 16; ++y) {
    for (std::size_t x = 14; x < 16; ++x) EXPECT_EQ(out.input.at(0, y, x), 1.0f);
  }
  EXPECT_EQ(out.label, 2u);
}

TEST(PatchTrigger, IdempotentAndLocal) {
  std::mt19937_64 rng(2);
  const auto trig = TriggerSpec::square_patch(3, 16, 3, 1.0f);
  for (int i = 0; i < 20; ++i) {
    const ImageSample img{test::random_tensor({3, 16, 16}, rng, 0.0f, 1.0f), 1};
    const auto once = apply_patch_trigger(img, trig);
    EXPECT_EQ(apply_patch_trigger(once, trig), once);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < 16; ++y) {
        for (std::size_t x = 0; x < 16; ++x) {
          if (y >= 13 && x >= 13) continue;
          EXPECT_EQ(once.input.at(c, y, x), img.input.at(c, y, x));
        }
      }
    }
  }
  // patch equal to the region underneath leaves the image alone
  const auto white = flat_image(1.0f);
  EXPECT_EQ(apply_patch_trigger(white, trig), white);
}

TEST(PatchTrigger, RejectsOutOfBounds) {
  auto trig = TriggerSpec::square_patch(3, 16, 2, 1.0f);
  trig.anchor_row = 15;
  EXPECT_THROW(apply_patch_trigger(flat_image(0.5f), trig), DataError);
  EXPECT_THROW(TriggerSpec::square_patch(3, 16, 17), ConfigError);
}

TEST(BlendTrigger, HandArithmetic) {
  auto trig = TriggerSpec::noise_blend({3, 16, 16}, 0.1, 1);
  trig.pattern = nn::Tensor({3, 16, 16}, 1.0f);
  const auto out = apply_blended_trigger(flat_image(0.4f), trig);
  for (float v : out.input.values()) EXPECT_NEAR(v, 0.46f, 1e-6f);
}

TEST(BlendTrigger, FixedPointAndBound) {
  std::mt19937_64 rng(8);
  for (double lambda : {0.05, 0.1, 0.5, 0.9}) {
    const auto trig = TriggerSpec::noise_blend({3, 16, 16}, lambda, 3);
    const ImageSample same{trig.pattern, 0};
    const auto fixed = apply_blended_trigger(same, trig);
    for (std::size_t i = 0; i < fixed.input.size(); ++i) EXPECT_NEAR(fixed.input[i], same.input[i], 1e-6f);
    const ImageSample img{test::random_tensor({3, 16, 16}, rng, 0.0f, 1.0f), 0};
    const auto out = apply_blended_trigger(img, trig);
    for (std::size_t i = 0; i < img.input.size(); ++i) {
      EXPECT_GE(out.input[i], 0.0f);
      EXPECT_LE(out.input[i], 1.0f);
      EXPECT_LE(std::abs(out.input[i] - img.input[i]), lambda + 1e-6);
    }
  }
}

TEST(BlendTrigger, RejectsShapeMismatch) {
  const auto trig = TriggerSpec::noise_blend({3, 8, 8}, 0.1, 1);
  EXPECT_THROW(apply_blended_trigger(flat_image(0.2f), trig), DataError);
}

TEST(PoisonTrain, FivePercentOfTwoThousand) {
  EXPECT_EQ(poison_count(0.05, 2000), 100u);
  EXPECT_EQ(poison_count(0.01, 2000), 20u);
  EXPECT_EQ(poison_count(0.07, 100), 7u);  // 0.07 * 100 is 7.000000000000001 in binary
  EXPECT_EQ(poison_count(0.051, 100), 6u);

  const auto [train, test] = gen_synthetic_dataset(SyntheticDatasetConfig{});
  PoisonSpec spec;
  spec.trigger = TriggerSpec::square_patch(3, 16);
  spec.seed = 12;
  const auto p = poison_train_set(train, spec);
  ASSERT_EQ(p.poisoned_indices.size(), 100u);
  EXPECT_TRUE(std::is_sorted(p.poisoned_indices.begin(), p.poisoned_indices.end()));
  EXPECT_EQ(std::set<std::size_t>(p.poisoned_indices.begin(), p.poisoned_indices.end()).size(), 100u);
  const std::set<std::size_t> poisoned(p.poisoned_indices.begin(), p.poisoned_indices.end());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (poisoned.count(i)) {
      EXPECT_EQ(p.samples[i].label, 0u);
      EXPECT_EQ(p.samples[i], apply_patch_trigger({train[i].input, 0}, spec.trigger));
    } else {
      EXPECT_EQ(p.samples[i], train[i]);
    }
  }
  EXPECT_EQ(poison_train_set(train, spec).poisoned_indices, p.poisoned_indices);
  spec.seed = 13;
  EXPECT_NE(poison_train_set(train, spec).poisoned_indices, p.poisoned_indices);
}

TEST(PoisonTrain, MinimalRateSelectsOne) {
  const auto [train, test] = gen_synthetic_dataset(small_config());
  PoisonSpec spec;
  spec.trigger = TriggerSpec::square_patch(3, 16);
  spec.target_class = 7;
  spec.poison_rate = 1.0 / 200.0;
  const auto p = poison_train_set(train, spec);
  ASSERT_EQ(p.poisoned_indices.size(), 1u);
  EXPECT_EQ(p.samples[p.poisoned_indices[0]].label, 7u);
}

TEST(PoisonTrain, RejectsBadSpec) {
  const auto [train, test] = gen_synthetic_dataset(small_config());
  PoisonSpec spec;
  spec.trigger = TriggerSpec::square_patch(3, 16);
  spec.poison_rate = 0.0;
  EXPECT_THROW(poison_train_set(train, spec), ConfigError);
  spec.poison_rate = 0.001;  // 0.2 of a sample
  EXPECT_THROW(poison_train_set(train, spec), ConfigError);
}

TEST(PoisonTest, ExcludesTargetClass) {
  const auto [train, test] = gen_synthetic_dataset(SyntheticDatasetConfig{});
  PoisonSpec spec;
  spec.trigger = TriggerSpec::square_patch(3, 16);
  spec.target_class = 4;
  const auto p = make_poisoned_test_set(test, spec);
  ASSERT_EQ(p.samples.size(), 450u);
  EXPECT_EQ(p.target_class, 4u);
  for (std::size_t i = 0; i < p.samples.size(); ++i) {
    const auto& src = test[p.source_indices[i]];
    EXPECT_NE(p.samples[i].label, 4u);
    EXPECT_EQ(p.samples[i].label, src.label);
    EXPECT_LE(diff_count(p.samples[i].input, src.input), 3u * 2 * 2);
  }
}

TEST(PoisonTest, AllTargetIsAnError) {
  std::vector<ImageSample> test(5, flat_image(0.2f, 1));
  PoisonSpec spec;
  spec.trigger = TriggerSpec::square_patch(3, 16);
  spec.target_class = 1;
  EXPECT_THROW(make_poisoned_test_set(test, spec), DataError);
}

TEST(Adaptive, BetaZeroIsPlainTraining) {
  const auto [train, test] = gen_synthetic_dataset(small_config());
  PoisonSpec spec;
  spec.trigger = TriggerSpec::square_patch(3, 16);
  const auto p = poison_train_set(train, spec);
  nn::TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 3;
  const auto net = test::small_net("c4,c4p,c4,c8p,d16", {3, 16, 16}, 10, 2);
  const auto plain = nn::train(net, p.samples, tc);
  const auto adaptive = train_adaptive(net, p, 0, 0.0, tc);
  EXPECT_TRUE(plain.network == adaptive.network);
  EXPECT_EQ(plain.loss_history, adaptive.loss_history);
}

TEST(Adaptive, PenaltyPullsPoisonedFeaturesTowardTarget) {
  const auto [train, test] = gen_synthetic_dataset(small_config());
  PoisonSpec spec;
  spec.trigger = TriggerSpec::square_patch(3, 16);
  spec.poison_rate = 0.1;
  const auto p = poison_train_set(train, spec);
  nn::TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 3;
  const auto net = test::small_net("c4,c4p,c4,c8p,d16", {3, 16, 16}, 10, 2);
  const auto a = train_adaptive(net, p, 0, 0.5, tc);
  EXPECT_FALSE(a.network == nn::train(net, p.samples, tc).network);
  EXPECT_EQ(a.loss_history.size(), 2u);
  EXPECT_THROW(train_adaptive(net, p, 0, 1.5, tc), ConfigError);
}

TEST(DatasetIo, RoundTripAndHeader) {
  const auto [train, test] = gen_synthetic_dataset(small_config());
  const auto bytes = encode_dataset(test, 10);
  const auto back = decode_dataset(bytes);
  EXPECT_EQ(back.num_classes, 10u);
  EXPECT_EQ(back.samples, test);
  EXPECT_EQ(encode_dataset(back.samples, 10), bytes);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 7), "LWFADAT");

  auto bad = bytes;
  bad.resize(bytes.size() - 1);
  EXPECT_THROW(decode_dataset(bad), DataError);
}

TEST(DatasetIo, PoisonManifestRoundTrip) {
  PoisonSpec spec;
  spec.trigger = TriggerSpec::noise_blend({3, 16, 16}, 0.1, 99);
  spec.target_class = 2;
  spec.poison_rate = 0.03;
  spec.seed = 5;
  const std::vector<std::size_t> idx{3, 8, 40};
  const auto path = std::filesystem::temp_directory_path() / "lwfa_test_manifest.json";
  save_poison_manifest(spec, idx, path);
  const auto back = load_poison_manifest(path);
  EXPECT_EQ(back.poisoned_indices, idx);
  EXPECT_EQ(back.spec.trigger, spec.trigger);
  EXPECT_EQ(back.spec.target_class, 2u);
  EXPECT_EQ(back.spec.poison_rate, 0.03);
  EXPECT_EQ(back.spec.seed, 5u);
  std::filesystem::remove(path);
}
