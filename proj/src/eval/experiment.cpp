#include "lwfa/eval/experiment.hpp"

#include <cinttypes>
#include <cstdio>
#include <set>

#include "lwfa/error.hpp"
#include "lwfa/seeding.hpp"

namespace lwfa::eval {

nn::TrainConfig ExperimentConfig::default_train_config() {
  nn::TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.epochs = 30;
  tc.batch_size = 32;
  tc.lr_decay_epochs = {22};
  return tc;
}

void ExperimentConfig::validate() const {
  data.validate();
  train.validate();
  nn::parse_blocks(blocks);
  if (attack.target_class >= data.num_classes) throw ConfigError("attack.target_class outside the class count");
  if (!(attack.poison_rate > 0.0 && attack.poison_rate < 1.0)) throw ConfigError("attack.poison_rate must lie in (0, 1)");
  if (!(attack.beta >= 0.0 && attack.beta <= 1.0)) throw ConfigError("attack.beta must lie in [0, 1]");
  if (attack.trigger == poison::TriggerKind::patch) {
    if (attack.patch_size == 0 || attack.patch_size > data.image_size) throw ConfigError("attack.patch_size does not fit the image");
    if (!(attack.patch_value >= 0.0f && attack.patch_value <= 1.0f)) throw ConfigError("attack.patch_value must lie in [0, 1]");
  } else if (!(attack.blend_ratio > 0.0 && attack.blend_ratio < 1.0)) {
    throw ConfigError("attack.blend_ratio must lie in (0, 1)");
  }
  if (!(defense.tau > 0.0)) throw ConfigError("defense.tau must be positive");
  if (!(defense.calibration_fraction > 0.0 && defense.calibration_fraction < 1.0)) {
    throw ConfigError("defense.calibration_fraction must lie in (0, 1)");
  }
}

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

}  // namespace

nlohmann::json experiment_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["dataset"] = {{"num_classes", cfg.data.num_classes},
                  {"image_size", cfg.data.image_size},
                  {"channels", cfg.data.channels},
                  {"train_count", cfg.data.train_count},
                  {"test_count", cfg.data.test_count},
                  {"noise_level", cfg.data.noise_level}};
  j["model"] = {{"blocks", cfg.blocks}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"momentum", cfg.train.momentum},
                {"weight_decay", cfg.train.weight_decay},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"lr_decay_epochs", cfg.train.lr_decay_epochs},
                {"lr_decay_factor", cfg.train.lr_decay_factor}};
  j["attack"] = {{"trigger", cfg.attack.trigger == poison::TriggerKind::patch ? "badnets" : "blended"},
                 {"patch_size", cfg.attack.patch_size},
                 {"patch_value", cfg.attack.patch_value},
                 {"blend_ratio", cfg.attack.blend_ratio},
                 {"target_class", cfg.attack.target_class},
                 {"poison_rate", cfg.attack.poison_rate},
                 {"beta", cfg.attack.beta}};
  j["defense"] = {{"tau", cfg.defense.tau},
                  {"metric", std::string(firewall::to_string(cfg.defense.metric))},
                  {"calibration_fraction", cfg.defense.calibration_fraction}};
  return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  check_keys(j, {"seed", "dataset", "model", "train", "attack", "defense"}, "config");
  read(j, "seed", cfg.seed, "config");
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    check_keys(d, {"num_classes", "image_size", "channels", "train_count", "test_count", "noise_level"}, "dataset");
    read(d, "num_classes", cfg.data.num_classes, "dataset");
    read(d, "image_size", cfg.data.image_size, "dataset");
    read(d, "channels", cfg.data.channels, "dataset");
    read(d, "train_count", cfg.data.train_count, "dataset");
    read(d, "test_count", cfg.data.test_count, "dataset");
    read(d, "noise_level", cfg.data.noise_level, "dataset");
  }
  if (j.contains("model")) {
    check_keys(j["model"], {"blocks"}, "model");
    read(j["model"], "blocks", cfg.blocks, "model");
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, {"learning_rate", "momentum", "weight_decay", "epochs", "batch_size", "lr_decay_epochs",
                   "lr_decay_factor"},
               "train");
    read(t, "learning_rate", cfg.train.learning_rate, "train");
    read(t, "momentum", cfg.train.momentum, "train");
    read(t, "weight_decay", cfg.train.weight_decay, "train");
    read(t, "epochs", cfg.train.epochs, "train");
    read(t, "batch_size", cfg.train.batch_size, "train");
    read(t, "lr_decay_epochs", cfg.train.lr_decay_epochs, "train");
    read(t, "lr_decay_factor", cfg.train.lr_decay_factor, "train");
  }
  if (j.contains("attack")) {
    const auto& a = j["attack"];
    check_keys(a, {"trigger", "patch_size", "patch_value", "blend_ratio", "target_class", "poison_rate", "beta"},
               "attack");
    std::string trigger = "badnets";
    read(a, "trigger", trigger, "attack");
    cfg.attack.trigger = poison::trigger_kind_from_string(trigger);
    read(a, "patch_size", cfg.attack.patch_size, "attack");
    read(a, "patch_value", cfg.attack.patch_value, "attack");
    read(a, "blend_ratio", cfg.attack.blend_ratio, "attack");
    read(a, "target_class", cfg.attack.target_class, "attack");
    read(a, "poison_rate", cfg.attack.poison_rate, "attack");
    read(a, "beta", cfg.attack.beta, "attack");
  }
  if (j.contains("defense")) {
    const auto& d = j["defense"];
    check_keys(d, {"tau", "metric", "calibration_fraction"}, "defense");
    read(d, "tau", cfg.defense.tau, "defense");
    std::string metric = "cosine";
    read(d, "metric", metric, "defense");
    cfg.defense.metric = firewall::metric_from_string(metric);
    read(d, "calibration_fraction", cfg.defense.calibration_fraction, "defense");
  }
  cfg.validate();
  return cfg;
}

std::string config_digest(const nlohmann::json& canonical) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(canonical.dump()));
  return buf;
}

StageSeeds stage_seeds(std::uint64_t master) {
  return {derive_seed(master, "data"),  derive_seed(master, "trigger"), derive_seed(master, "poison"),
          derive_seed(master, "init"),  derive_seed(master, "train"),   derive_seed(master, "clean-train"),
          derive_seed(master, "calibration")};
}

DataBundle make_data(const ExperimentConfig& cfg) {
  auto dc = cfg.data;
  dc.seed = stage_seeds(cfg.seed).data;
  auto [train, test] = poison::gen_synthetic_dataset(dc);
  return {std::move(train), std::move(test), dc.num_classes};
}

poison::PoisonSpec make_poison_spec(const ExperimentConfig& cfg, const nn::Shape& image_shape) {
  const auto seeds = stage_seeds(cfg.seed);
  poison::PoisonSpec spec;
  spec.target_class = cfg.attack.target_class;
  spec.poison_rate = cfg.attack.poison_rate;
  spec.seed = seeds.poison;
  if (image_shape.size() != 3 || image_shape[1] != image_shape[2]) throw DataError("images must be square C x S x S");
  spec.trigger = cfg.attack.trigger == poison::TriggerKind::patch
                     ? poison::TriggerSpec::square_patch(image_shape[0], image_shape[1], cfg.attack.patch_size,
                                                         cfg.attack.patch_value)
                     : poison::TriggerSpec::noise_blend(image_shape, cfg.attack.blend_ratio, seeds.trigger);
  return spec;
}

nn::Network make_network(const ExperimentConfig& cfg, const nn::Shape& image_shape, std::size_t num_classes) {
  nn::ArchSpec arch{image_shape, num_classes, nn::parse_blocks(cfg.blocks)};
  return nn::build_network(arch, stage_seeds(cfg.seed).init);
}

namespace {
const nn::Shape& image_shape_of(const DataBundle& data) {
  if (data.train.empty() || data.test.empty()) throw DataError("train and test sets must be nonempty");
  return data.train.front().input.shape();
}
}  // namespace

AttackRun run_attack(const ExperimentConfig& cfg, const DataBundle& data) {
  const auto& shape = image_shape_of(data);
  AttackRun run;
  run.spec = make_poison_spec(cfg, shape);
  run.poisoned_train = poison::poison_train_set(data.train, run.spec);
  run.poisoned_test = poison::make_poisoned_test_set(data.test, run.spec);
  auto tc = cfg.train;
  tc.seed = stage_seeds(cfg.seed).train;
  auto result = poison::train_adaptive(make_network(cfg, shape, data.num_classes), run.poisoned_train,
                                       cfg.attack.target_class, cfg.attack.beta, tc);
  run.net = std::move(result.network);
  run.loss_history = std::move(result.loss_history);
  return run;
}

nn::Network train_clean(const ExperimentConfig& cfg, const DataBundle& data) {
  const auto& shape = image_shape_of(data);
  auto tc = cfg.train;
  tc.seed = stage_seeds(cfg.seed).train;
  return nn::train(make_network(cfg, shape, data.num_classes), data.train, tc).network;
}

poison::PoisonedTestSet make_poisoned_test(const ExperimentConfig& cfg, const DataBundle& data) {
  return poison::make_poisoned_test_set(data.test, make_poison_spec(cfg, image_shape_of(data)));
}

DefenseRun run_defense(const ExperimentConfig& cfg, const nn::Network& net, const DataBundle& data,
                       const poison::PoisonedTestSet& poisoned_test) {
  net.require_analysis_taps();
  DefenseRun run;
  run.split = split_calibration(data.test, data.num_classes, cfg.defense.calibration_fraction,
                                stage_seeds(cfg.seed).calibration);
  run.calibration_traces = firewall::collect_class_traces(net, gather(data.test, run.split.calibration));
  run.fw = firewall::calibrate_from_traces(run.calibration_traces, net.tap_count(), cfg.defense.tau,
                                           cfg.defense.metric);
  run.benign = trace_population(net, gather(data.test, run.split.evaluation));
  run.poisoned = trace_population(net, poisoned_test.samples);
  run.benign_scores = score_population(run.fw, run.benign);
  run.poisoned_scores = score_population(run.fw, run.poisoned);
  run.detection = count_detections(run.fw, run.benign_scores, run.poisoned_scores, cfg.defense.tau);

  const std::size_t t = poisoned_test.target_class;
  const auto cents = scope::compute_centroids(run.calibration_traces.at(t), t,
                                              scope::analysis_range(net.tap_count()));
  std::vector<scope::SimilarityRecord> benign_records, poisoned_records;
  for (const auto& tr : run.calibration_traces[t]) benign_records.push_back(scope::layerwise_cosine(tr, cents));
  for (const auto& tr : run.poisoned.traces) poisoned_records.push_back(scope::layerwise_cosine(tr, cents));
  run.benign_profile = scope::mean_profile(benign_records, t);
  run.poisoned_profile = scope::mean_profile(poisoned_records, t);
  return run;
}

}  // namespace lwfa::eval
