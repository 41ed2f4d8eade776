#include "lwfa/eval/sweeps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lwfa/error.hpp"

namespace lwfa::eval {

DetectionCache DetectionCache::of(const DefenseRun& run, std::size_t tap_count) {
  return {&run.calibration_traces, tap_count, &run.benign, &run.poisoned};
}

std::vector<double> ordered_grid(std::span<const double> values, double lo, double hi, bool lo_inclusive,
                                 bool hi_inclusive, const std::string& what) {
  if (values.empty()) throw ConfigError(what + " grid is empty");
  std::vector<double> out(values.begin(), values.end());
  for (double v : out) {
    if (std::isnan(v)) throw ConfigError(what + " grid contains NaN");
  }
  std::sort(out.begin(), out.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    const bool above = lo_inclusive ? v >= lo : v > lo;
    const bool below = hi_inclusive ? v <= hi : v < hi;
    if (!above || !below) throw ConfigError(what + " value " + std::to_string(v) + " out of range");
    if (i > 0 && out[i - 1] == v) throw ConfigError(what + " grid repeats " + std::to_string(v));
  }
  return out;
}

namespace {

void check_cache(const DetectionCache& cache) {
  if (!cache.calibration || !cache.benign || !cache.poisoned) throw ComputationError("detection cache is incomplete");
}

DetectionMetrics evaluate(const firewall::FirewallModel& fw, const DetectionCache& cache, double tau) {
  return count_detections(fw, score_population(fw, *cache.benign), score_population(fw, *cache.poisoned), tau);
}

}  // namespace

std::vector<ThresholdRow> threshold_sweep(const DetectionCache& cache, std::span<const double> taus,
                                          firewall::Metric metric) {
  check_cache(cache);
  const auto grid = ordered_grid(taus, 0.0, std::numeric_limits<double>::infinity(), false, true, "tau");
  const auto fw = firewall::calibrate_from_traces(*cache.calibration, cache.tap_count, grid.front(), metric);
  const auto benign = score_population(fw, *cache.benign);
  const auto poisoned = score_population(fw, *cache.poisoned);
  std::vector<ThresholdRow> rows;
  for (double tau : grid) rows.push_back({tau, count_detections(fw, benign, poisoned, tau)});
  return rows;
}

std::vector<LayerRow> per_layer_detection(const DetectionCache& cache, double tau, firewall::Metric metric) {
  check_cache(cache);
  std::vector<LayerRow> rows;
  for (std::size_t l = 1; l <= cache.tap_count; ++l) {
    const std::size_t window[] = {l};
    const auto fw = firewall::calibrate_fixed_window(*cache.calibration, window, tau, metric);
    rows.push_back({l, std::vector<std::size_t>(cache.calibration->size(), l), evaluate(fw, cache, tau)});
  }
  const auto fw = firewall::calibrate_from_traces(*cache.calibration, cache.tap_count, tau, metric);
  LayerRow ours{0, {}, evaluate(fw, cache, tau)};
  for (const auto& cal : fw.calibrations) ours.loi.push_back(cal.loi);
  rows.push_back(std::move(ours));
  return rows;
}

std::vector<MetricRow> metric_comparison(const DetectionCache& cache, std::span<const double> taus) {
  std::vector<MetricRow> rows;
  for (auto metric : {firewall::Metric::cosine, firewall::Metric::euclidean}) {
    for (const auto& r : threshold_sweep(cache, taus, metric)) rows.push_back({metric, r.tau, r.detection});
  }
  return rows;
}

namespace {

PipelineRow pipeline_point(const ExperimentConfig& cfg, const DataBundle& data, double value) {
  const auto attack = run_attack(cfg, data);
  const auto defense = run_defense(cfg, attack.net, data, attack.poisoned_test);
  return {value, attack_metrics(attack.net, data.test, attack.poisoned_test.samples, cfg.attack.target_class),
          defense.detection};
}

}  // namespace

std::vector<PipelineRow> poison_rate_sweep(const ExperimentConfig& cfg, const DataBundle& data,
                                           std::span<const double> rates) {
  std::vector<PipelineRow> rows;
  for (double rate : ordered_grid(rates, 0.0, 1.0, false, false, "poison rate")) {
    auto point = cfg;
    point.attack.poison_rate = rate;
    rows.push_back(pipeline_point(point, data, rate));
  }
  return rows;
}

std::vector<PipelineRow> adaptive_sweep(const ExperimentConfig& cfg, const DataBundle& data,
                                        std::span<const double> betas) {
  std::vector<PipelineRow> rows;
  for (double beta : ordered_grid(betas, 0.0, 1.0, true, true, "beta")) {
    auto point = cfg;
    point.attack.beta = beta;
    rows.push_back(pipeline_point(point, data, beta));
  }
  return rows;
}

}  // namespace lwfa::eval
