#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lwfa/nn/train.hpp"
#include "lwfa/poison/trigger.hpp"

namespace lwfa::poison {

struct PoisonSpec {
  TriggerSpec trigger;
  std::size_t target_class = 0;
  double poison_rate = 0.05;
  std::uint64_t seed = 0;

  void validate(std::size_t num_classes) const;
};

/// ceil(rate * n), tolerant of the representation error in `rate`.
std::size_t poison_count(double rate, std::size_t n);

struct PoisonedTrainSet {
  Dataset samples;
  std::vector<std::size_t> poisoned_indices;  // ascending
};

/// Dirty-label poisoning: a seeded random subset of ceil(rate * N) samples gets
/// the trigger and the target label.
PoisonedTrainSet poison_train_set(std::span<const ImageSample> train, const PoisonSpec& spec);

/// Triggered copies of every test sample whose true label differs from the
/// target. Labels stay the true labels; the target is carried alongside.
struct PoisonedTestSet {
  Dataset samples;
  std::vector<std::size_t> source_indices;
  std::size_t target_class = 0;
};

PoisonedTestSet make_poisoned_test_set(std::span<const ImageSample> test, const PoisonSpec& spec);

/// Adaptive attacker: trains on (1 - beta) * cross_entropy + beta * L_cd, where
/// L_cd averages 1 - cos(a^l, centroid^l) over the poisoned samples of a batch
/// and the taps floor(L/2)..L. Centroids come from the benign target-class
/// training samples and are refreshed at the start of every epoch. With
/// beta = 0 this is exactly nn::train.
nn::TrainResult train_adaptive(nn::Network net, const PoisonedTrainSet& data,
                               std::size_t target_class, double beta,
                               const nn::TrainConfig& config);

}  // namespace lwfa::poison
