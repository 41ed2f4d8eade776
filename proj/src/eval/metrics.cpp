#include "lwfa/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lwfa/error.hpp"

namespace lwfa::eval {

namespace {
double percent(std::size_t part, std::size_t whole) {
  return 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}
}  // namespace

AttackMetrics attack_metrics(const nn::Network& net, std::span<const nn::Sample> benign_test,
                             std::span<const nn::Sample> poisoned_test, std::size_t target_class) {
  if (benign_test.empty() || poisoned_test.empty()) throw DataError("attack metrics need nonempty test sets");
  AttackMetrics m;
  m.benign_total = benign_test.size();
  m.poisoned_total = poisoned_test.size();
  for (const auto& s : benign_test) m.correct += nn::forward(net, s.input).predicted_class == s.label;
  for (const auto& s : poisoned_test) m.hits += nn::forward(net, s.input).predicted_class == target_class;
  m.ma = percent(m.correct, m.benign_total);
  m.asr = percent(m.hits, m.poisoned_total);
  return m;
}

DetectionMetrics make_detection_metrics(std::size_t tp, std::size_t poisoned_total, std::size_t fp,
                                        std::size_t benign_total) {
  if (poisoned_total == 0 || benign_total == 0) throw DataError("detection metrics need nonempty populations");
  if (tp > poisoned_total || fp > benign_total) throw ComputationError("detection counts exceed populations");
  return {percent(tp, poisoned_total), percent(fp, benign_total), tp, poisoned_total, fp, benign_total};
}

TracedPopulation trace_population(const nn::Network& net, std::span<const nn::Sample> samples) {
  TracedPopulation pop;
  pop.predicted.reserve(samples.size());
  pop.traces.reserve(samples.size());
  for (const auto& s : samples) {
    auto [pred, trace] = nn::forward_traced(net, s.input);
    pop.predicted.push_back(pred.predicted_class);
    pop.traces.push_back(std::move(trace));
  }
  return pop;
}

std::vector<firewall::ScoredInput> score_population(const firewall::FirewallModel& fw,
                                                    const TracedPopulation& pop) {
  std::vector<firewall::ScoredInput> out;
  out.reserve(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const std::size_t cls = pop.predicted[i];
    out.push_back({cls, firewall::window_score(fw.for_class(cls), fw.metric, pop.traces[i])});
  }
  return out;
}

DetectionMetrics count_detections(const firewall::FirewallModel& fw,
                                  std::span<const firewall::ScoredInput> benign,
                                  std::span<const firewall::ScoredInput> poisoned, double tau) {
  auto flagged = [&](std::span<const firewall::ScoredInput> scores) {
    std::size_t n = 0;
    for (const auto& s : scores) n += firewall::judge_at(fw, s.predicted_class, s.score, tau).is_poisoned;
    return n;
  };
  return make_detection_metrics(flagged(poisoned), poisoned.size(), flagged(benign), benign.size());
}

DetectionMetrics detection_metrics(const nn::Network& net, const firewall::FirewallModel& fw,
                                   std::span<const nn::Sample> benign_test,
                                   std::span<const nn::Sample> poisoned_test) {
  const auto benign = score_population(fw, trace_population(net, benign_test));
  const auto poisoned = score_population(fw, trace_population(net, poisoned_test));
  return count_detections(fw, benign, poisoned, fw.tau);
}

CalibrationSplit split_calibration(std::span<const nn::Sample> benign_test, std::size_t num_classes,
                                   double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("calibration fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < benign_test.size(); ++i) {
    if (benign_test[i].label >= num_classes) throw DataError("test label outside the class count");
    by_class[benign_test[i].label].push_back(i);
  }
  std::mt19937_64 rng(seed);
  CalibrationSplit split;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& idx = by_class[c];
    const auto take = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size()) + 1e-9)));
    if (idx.size() <= take) {
      throw DataError("class " + std::to_string(c) + " has too few test samples (" + std::to_string(idx.size()) +
                      ") to split off a calibration set");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    split.calibration.insert(split.calibration.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    split.evaluation.insert(split.evaluation.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(split.calibration.begin(), split.calibration.end());
  std::sort(split.evaluation.begin(), split.evaluation.end());
  return split;
}

std::vector<nn::Sample> gather(std::span<const nn::Sample> samples, std::span<const std::size_t> indices) {
  std::vector<nn::Sample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= samples.size()) throw DataError("sample index out of range");
    out.push_back(samples[i]);
  }
  return out;
}

}  // namespace lwfa::eval
