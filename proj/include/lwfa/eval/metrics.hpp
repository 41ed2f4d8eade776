#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lwfa/firewall/firewall.hpp"
#include "lwfa/poison/poison.hpp"

namespace lwfa::eval {

/// Percentages, with the counts they were computed from.
struct AttackMetrics {
  double ma = 0.0;
  double asr = 0.0;
  std::size_t correct = 0;
  std::size_t benign_total = 0;
  std::size_t hits = 0;  // poisoned inputs predicted as the target
  std::size_t poisoned_total = 0;

  bool operator==(const AttackMetrics&) const = default;
};

struct DetectionMetrics {
  double tpr = 0.0;
  double fpr = 0.0;
  std::size_t true_positives = 0;
  std::size_t poisoned_total = 0;
  std::size_t false_positives = 0;
  std::size_t benign_total = 0;

  bool operator==(const DetectionMetrics&) const = default;
};

AttackMetrics attack_metrics(const nn::Network& net, std::span<const nn::Sample> benign_test,
                             std::span<const nn::Sample> poisoned_test, std::size_t target_class);

DetectionMetrics make_detection_metrics(std::size_t tp, std::size_t poisoned_total, std::size_t fp,
                                        std::size_t benign_total);

/// Predictions and activation traces of a population, computed once and reused
/// by every threshold, window and metric the sweeps try.
struct TracedPopulation {
  std::vector<std::size_t> predicted;
  std::vector<nn::ActivationTrace> traces;

  std::size_t size() const { return predicted.size(); }
};

TracedPopulation trace_population(const nn::Network& net, std::span<const nn::Sample> samples);

/// Window scores of a traced population under `fw` (tau plays no part).
std::vector<firewall::ScoredInput> score_population(const firewall::FirewallModel& fw,
                                                    const TracedPopulation& pop);

/// Counts verdicts at `tau` on cached scores.
DetectionMetrics count_detections(const firewall::FirewallModel& fw,
                                  std::span<const firewall::ScoredInput> benign,
                                  std::span<const firewall::ScoredInput> poisoned, double tau);

/// Scores every benign and poisoned input against its predicted class's
/// calibration at the firewall's own tau.
DetectionMetrics detection_metrics(const nn::Network& net, const firewall::FirewallModel& fw,
                                   std::span<const nn::Sample> benign_test,
                                   std::span<const nn::Sample> poisoned_test);

/// Seeded per-class split of the benign test set into calibration and
/// evaluation indices. Each class contributes floor(fraction * n_c) samples,
/// but at least 2, to calibration.
struct CalibrationSplit {
  std::vector<std::size_t> calibration;  // ascending
  std::vector<std::size_t> evaluation;   // ascending, disjoint from calibration
};

CalibrationSplit split_calibration(std::span<const nn::Sample> benign_test, std::size_t num_classes,
                                   double fraction, std::uint64_t seed);

std::vector<nn::Sample> gather(std::span<const nn::Sample> samples, std::span<const std::size_t> indices);

}  // namespace lwfa::eval
