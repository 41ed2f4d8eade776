#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lwfa/eval/metrics.hpp"
#include "lwfa/poison/dataset.hpp"

namespace lwfa::eval {

inline constexpr const char* kDefaultBlocks = "c16,c16,c16,c16p,c32,c64p,d64";

struct AttackConfig {
  poison::TriggerKind trigger = poison::TriggerKind::patch;
  std::size_t patch_size = 2;
  float patch_value = 1.0f;
  double blend_ratio = 0.1;
  std::size_t target_class = 0;
  double poison_rate = 0.05;
  double beta = 0.0;  // adaptive penalty weight; 0 is the plain attack
};

struct DefenseConfig {
  double tau = firewall::kDefaultTau;
  firewall::Metric metric = firewall::Metric::cosine;
  double calibration_fraction = 0.1;
};

/// Everything one train -> poison -> calibrate -> evaluate run depends on. The
/// sub-config seed fields are ignored: every stage draws from `seed` through a
/// named sub-seed.
struct ExperimentConfig {
  poison::SyntheticDatasetConfig data;
  std::string blocks = kDefaultBlocks;
  nn::TrainConfig train = default_train_config();
  AttackConfig attack;
  DefenseConfig defense;
  std::uint64_t seed = 1;

  static nn::TrainConfig default_train_config();
  void validate() const;
};

nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
/// Strict: unknown keys are configuration errors. Missing keys keep defaults.
ExperimentConfig experiment_from_json(const nlohmann::json& j);

/// 16 hex digits of FNV-1a over the canonical JSON of the config.
std::string config_digest(const nlohmann::json& canonical);

struct StageSeeds {
  std::uint64_t data, trigger, poison, init, train, clean_train, calibration;
};
StageSeeds stage_seeds(std::uint64_t master);

struct DataBundle {
  poison::Dataset train;
  poison::Dataset test;
  std::size_t num_classes = 0;
};

DataBundle make_data(const ExperimentConfig& cfg);
poison::PoisonSpec make_poison_spec(const ExperimentConfig& cfg, const nn::Shape& image_shape);
nn::Network make_network(const ExperimentConfig& cfg, const nn::Shape& image_shape, std::size_t num_classes);

struct AttackRun {
  poison::PoisonSpec spec;
  poison::PoisonedTrainSet poisoned_train;
  poison::PoisonedTestSet poisoned_test;
  nn::Network net;
  std::vector<double> loss_history;
};

/// Poisons the training set and trains (adaptively when beta > 0).
AttackRun run_attack(const ExperimentConfig& cfg, const DataBundle& data);

/// Same architecture, initialization and schedule trained on the clean set.
nn::Network train_clean(const ExperimentConfig& cfg, const DataBundle& data);

/// Poisoned test inputs regenerated from the config; identical to
/// run_attack's.
poison::PoisonedTestSet make_poisoned_test(const ExperimentConfig& cfg, const DataBundle& data);

struct DefenseRun {
  CalibrationSplit split;
  firewall::ClassTraces calibration_traces;
  TracedPopulation benign;    // evaluation split of the benign test set
  TracedPopulation poisoned;  // every poisoned test input
  firewall::FirewallModel fw;
  std::vector<firewall::ScoredInput> benign_scores;
  std::vector<firewall::ScoredInput> poisoned_scores;
  DetectionMetrics detection;
  scope::SimilarityProfile benign_profile;    // target class, analysis range
  scope::SimilarityProfile poisoned_profile;  // poisoned inputs vs the same centroids
};

DefenseRun run_defense(const ExperimentConfig& cfg, const nn::Network& net, const DataBundle& data,
                       const poison::PoisonedTestSet& poisoned_test);

}  // namespace lwfa::eval
