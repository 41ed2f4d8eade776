#pragma once

#include <span>
#include <string>
#include <vector>

#include "lwfa/eval/experiment.hpp"

namespace lwfa::eval {

inline const std::vector<double> kDefaultTaus{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
inline const std::vector<double> kDefaultRates{0.01, 0.03, 0.05, 0.10};
inline const std::vector<double> kDefaultBetas{0.0, 0.5, 0.9, 0.95};

/// Cached inputs shared by the sweeps that reuse one trained network.
struct DetectionCache {
  const firewall::ClassTraces* calibration = nullptr;
  std::size_t tap_count = 0;
  const TracedPopulation* benign = nullptr;
  const TracedPopulation* poisoned = nullptr;

  static DetectionCache of(const DefenseRun& run, std::size_t tap_count);
};

struct ThresholdRow {
  double tau = 0.0;
  DetectionMetrics detection;
};

/// One calibration, scores cached, verdicts recomputed per tau. Rows come out
/// in increasing tau; duplicate or non-positive taus are rejected.
std::vector<ThresholdRow> threshold_sweep(const DetectionCache& cache, std::span<const double> taus,
                                          firewall::Metric metric = firewall::Metric::cosine);

struct LayerRow {
  std::size_t tap = 0;  // 0 marks the standard three-layer method
  std::vector<std::size_t> loi;  // per class; single-layer rows repeat the tap
  DetectionMetrics detection;
};

/// One-layer calibration for every tap 1..L, then the standard method.
std::vector<LayerRow> per_layer_detection(const DetectionCache& cache, double tau,
                                          firewall::Metric metric = firewall::Metric::cosine);

struct MetricRow {
  firewall::Metric metric = firewall::Metric::cosine;
  double tau = 0.0;
  DetectionMetrics detection;
};

/// Cosine block followed by the Euclidean block, each over `taus`.
std::vector<MetricRow> metric_comparison(const DetectionCache& cache, std::span<const double> taus);

struct PipelineRow {
  double value = 0.0;  // poison rate or beta
  AttackMetrics attack;
  DetectionMetrics detection;
};

/// Full attack -> calibrate -> evaluate per poison rate, all under cfg.seed.
std::vector<PipelineRow> poison_rate_sweep(const ExperimentConfig& cfg, const DataBundle& data,
                                           std::span<const double> rates);

/// Full adaptive attack -> calibrate -> evaluate per beta.
std::vector<PipelineRow> adaptive_sweep(const ExperimentConfig& cfg, const DataBundle& data,
                                        std::span<const double> betas);

/// Sorted copy; throws ConfigError on duplicates or values outside (lo, hi).
std::vector<double> ordered_grid(std::span<const double> values, double lo, double hi, bool lo_inclusive,
                                 bool hi_inclusive, const std::string& what);

}  // namespace lwfa::eval
