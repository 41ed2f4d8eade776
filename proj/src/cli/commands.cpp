#include "lwfa/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "lwfa/binary_io.hpp"
#include "lwfa/error.hpp"
#include "lwfa/eval/report.hpp"
#include "lwfa/nn/model_io.hpp"
#include "lwfa/poison/dataset_io.hpp"

namespace lwfa::cli {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.sweeps = {eval::kDefaultTaus, eval::kDefaultRates, eval::kDefaultBetas};
  return cfg;
}

namespace {

std::vector<double> read_grid(const json& j, const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("sweeps.") + key + " must be a list of numbers");
  }
}

json results_json(const RunConfig& cfg) {
  auto j = eval::experiment_to_json(cfg.experiment);
  j["sweeps"] = {{"taus", cfg.sweeps.taus}, {"rates", cfg.sweeps.rates}, {"betas", cfg.sweeps.betas}};
  return j;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg = default_run_config();
  auto experiment = j;
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError("output_dir must be a string");
    cfg.output_dir = j["output_dir"].get<std::string>();
    experiment.erase("output_dir");
  }
  if (j.contains("sweeps")) {
    const auto& s = j["sweeps"];
    if (!s.is_object()) throw ConfigError("sweeps must be an object");
    for (const auto& [key, value] : s.items()) {
      if (key != "taus" && key != "rates" && key != "betas") throw ConfigError("unknown key '" + key + "' in sweeps");
    }
    cfg.sweeps.taus = read_grid(s, "taus", cfg.sweeps.taus);
    cfg.sweeps.rates = read_grid(s, "rates", cfg.sweeps.rates);
    cfg.sweeps.betas = read_grid(s, "betas", cfg.sweeps.betas);
    experiment.erase("sweeps");
  }
  cfg.experiment = eval::experiment_from_json(experiment);
  // grids are validated up front so a bad sweep fails before any training
  using eval::ordered_grid;
  ordered_grid(cfg.sweeps.taus, 0.0, std::numeric_limits<double>::infinity(), false, true, "tau");
  ordered_grid(cfg.sweeps.rates, 0.0, 1.0, false, false, "poison rate");
  ordered_grid(cfg.sweeps.betas, 0.0, 1.0, true, true, "beta");
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

json run_config_to_json(const RunConfig& cfg) {
  auto j = results_json(cfg);
  j["output_dir"] = cfg.output_dir.string();
  return j;
}

std::string run_config_digest(const RunConfig& cfg) { return eval::config_digest(results_json(cfg)); }

// ---- manifest

RunManifest::RunManifest(std::string command, const RunConfig& cfg)
    : command_(std::move(command)), digest_(run_config_digest(cfg)), seed_(cfg.experiment.seed) {}

void RunManifest::finish_stage(const std::string& name, std::chrono::steady_clock::time_point start) {
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
  timings_.emplace_back(name, dt.count());
  current_.clear();
}

void RunManifest::add_artifact(const fs::path& path) { artifacts_.push_back(path.generic_string()); }

void RunManifest::add_artifacts(const std::vector<fs::path>& paths) {
  for (const auto& p : paths) add_artifact(p);
}

void RunManifest::fail(const std::string& error) {
  failed_ = true;
  failed_stage_ = current_.empty() ? "setup" : current_;
  error_ = error;
}

json RunManifest::to_json() const {
  json j;
  j["command"] = command_;
  j["tool_version"] = kToolVersion;
  j["config_digest"] = digest_;
  j["master_seed"] = seed_;
  j["status"] = failed_ ? "failed" : "ok";
  if (failed_) {
    j["failed_stage"] = failed_stage_;
    j["error"] = error_;
  }
  j["artifacts"] = artifacts_;
  json timings = json::array();
  for (const auto& [stage, seconds] : timings_) timings.push_back({{"stage", stage}, {"seconds", seconds}});
  j["timings"] = timings;
  return j;
}

void RunManifest::write(const fs::path& path) const noexcept {
  try {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    io::write_text_file(path, to_json().dump(2) + "\n");
  } catch (...) {
    std::fprintf(stderr, "warning: could not write manifest %s\n", path.string().c_str());
  }
}

// ---- commands

namespace {

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

poison::Dataset load_split(const fs::path& path, const RunConfig& cfg, std::size_t expected_count) {
  if (!fs::exists(path)) throw DataError(path.string() + " not found; run gen-data first");
  auto file = poison::load_dataset(path);
  const auto& d = cfg.experiment.data;
  const nn::Shape shape{d.channels, d.image_size, d.image_size};
  const bool matches = file.num_classes == d.num_classes && file.samples.size() == expected_count &&
                       !file.samples.empty() && file.samples.front().input.shape() == shape;
  if (!matches) throw DataError(path.string() + " does not match the dataset section of the config; rerun gen-data");
  return std::move(file.samples);
}

eval::DataBundle load_data(const RunConfig& cfg, const Layout& out) {
  const auto& d = cfg.experiment.data;
  return {load_split(out.train_data(), cfg, d.train_count), load_split(out.test_data(), cfg, d.test_count),
          d.num_classes};
}

nn::Network load_model(const RunConfig& cfg, const Layout& out) {
  if (!fs::exists(out.model())) throw DataError(out.model().string() + " not found; run run-attack first");
  auto net = nn::load_network(out.model());
  const auto& d = cfg.experiment.data;
  if (net.num_classes() != d.num_classes || net.input_shape() != nn::Shape{d.channels, d.image_size, d.image_size}) {
    throw DataError(out.model().string() + " does not fit the configured dataset");
  }
  return net;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, RunManifest& manifest) {
  const Layout out{cfg.output_dir};
  const auto data = manifest.stage("generate", [&] { return eval::make_data(cfg.experiment); });
  manifest.stage("write", [&] {
    make_dir(out.train_data().parent_path());
    poison::save_dataset(data.train, data.num_classes, out.train_data());
    poison::save_dataset(data.test, data.num_classes, out.test_data());
  });
  manifest.add_artifacts({out.train_data(), out.test_data()});
}

void cmd_run_attack(const RunConfig& cfg, RunManifest& manifest) {
  const Layout out{cfg.output_dir};
  const auto& ex = cfg.experiment;
  const auto data = manifest.stage("load-data", [&] { return load_data(cfg, out); });
  const auto run = manifest.stage("train", [&] { return eval::run_attack(ex, data); });
  const auto metrics = manifest.stage("evaluate", [&] {
    return eval::attack_metrics(run.net, data.test, run.poisoned_test.samples, ex.attack.target_class);
  });
  manifest.stage("write", [&] {
    make_dir(out.root);
    nn::save_network(run.net, out.model());
    poison::save_poison_manifest(run.spec, run.poisoned_train.poisoned_indices, out.poison_manifest());
    manifest.add_artifacts({out.model(), out.poison_manifest()});
    manifest.add_artifacts(
        eval::write_report(eval::attack_report(metrics, ex.seed, run_config_digest(cfg)), out.root));
  });
}

void cmd_defend(const RunConfig& cfg, RunManifest& manifest) {
  const Layout out{cfg.output_dir};
  const auto& ex = cfg.experiment;
  const auto data = manifest.stage("load-data", [&] { return load_data(cfg, out); });
  const auto net = manifest.stage("load-model", [&] { return load_model(cfg, out); });
  const auto run = manifest.stage("calibrate-detect", [&] {
    return eval::run_defense(ex, net, data, eval::make_poisoned_test(ex, data));
  });
  manifest.stage("write", [&] {
    make_dir(out.root);
    firewall::save_firewall(run.fw, out.firewall());
    io::write_text_file(out.profiles(), scope::format_profiles(run.benign_profile, run.poisoned_profile));
    manifest.add_artifacts({out.firewall(), out.profiles()});
    manifest.add_artifacts(eval::write_report(
        eval::detection_report(run.detection, ex.defense.tau, ex.defense.metric, ex.seed, run_config_digest(cfg)),
        out.root));
  });
}

SweepKind sweep_kind_from_string(const std::string& name) {
  static const std::map<std::string, SweepKind> kinds{{"tau", SweepKind::tau},
                                                      {"rate", SweepKind::rate},
                                                      {"layer", SweepKind::layer},
                                                      {"beta", SweepKind::beta},
                                                      {"metric", SweepKind::metric}};
  const auto it = kinds.find(name);
  if (it == kinds.end()) throw ConfigError("unknown sweep kind '" + name + "' (tau, rate, layer, beta, metric)");
  return it->second;
}

void cmd_sweep(const RunConfig& cfg, SweepKind kind, RunManifest& manifest) {
  const Layout out{cfg.output_dir};
  const auto& ex = cfg.experiment;
  const auto digest = run_config_digest(cfg);
  const auto data = manifest.stage("load-data", [&] { return load_data(cfg, out); });

  eval::Report report;
  if (kind == SweepKind::rate || kind == SweepKind::beta) {
    report = manifest.stage("pipelines", [&] {
      if (kind == SweepKind::rate) {
        const auto rows = eval::poison_rate_sweep(ex, data, cfg.sweeps.rates);
        return eval::rate_report(rows, ex.seed, digest);
      }
      const auto rows = eval::adaptive_sweep(ex, data, cfg.sweeps.betas);
      return eval::beta_report(rows, ex.seed, digest);
    });
  } else {
    const auto net = manifest.stage("load-model", [&] { return load_model(cfg, out); });
    const auto run = manifest.stage("trace", [&] {
      return eval::run_defense(ex, net, data, eval::make_poisoned_test(ex, data));
    });
    const auto cache = eval::DetectionCache::of(run, net.tap_count());
    report = manifest.stage("sweep", [&] {
      switch (kind) {
        case SweepKind::tau:
          return eval::threshold_report(eval::threshold_sweep(cache, cfg.sweeps.taus, ex.defense.metric), ex.seed,
                                        digest);
        case SweepKind::layer:
          return eval::layer_report(eval::per_layer_detection(cache, ex.defense.tau, ex.defense.metric), ex.seed,
                                    digest);
        default:
          return eval::metric_report(eval::metric_comparison(cache, cfg.sweeps.taus), ex.seed, digest);
      }
    });
  }
  manifest.stage("write", [&] {
    make_dir(out.root);
    manifest.add_artifacts(eval::write_report(report, out.root));
  });
}

// ---- inspect

namespace {

std::string shape_text(const nn::Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

std::string inspect_network(const nn::Network& net) {
  std::ostringstream os;
  os << "model: input " << shape_text(net.input_shape()) << ", " << net.num_classes() << " classes, "
     << net.layers().size() << " layers, " << net.parameter_count() << " parameters, " << net.tap_count()
     << " taps\n";
  std::size_t tap = 0;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& layer = net.layers()[i];
    os << "  [" << i << "] " << nn::to_string(layer.kind);
    if (layer.kind == nn::LayerKind::convolution) {
      os << " " << layer.in_channels << "->" << layer.out_channels << " k" << layer.kernel << " p" << layer.padding;
    } else if (layer.kind == nn::LayerKind::dense) {
      os << " " << layer.in_channels << "->" << layer.out_channels;
    } else if (layer.kind == nn::LayerKind::max_pool) {
      os << " " << layer.pool;
    }
    os << "  out " << shape_text(net.layer_output_shape(i));
    if (layer.is_tap) {
      ++tap;
      os << "  tap " << tap << " (" << net.tap_width(tap) << " features)";
    }
    os << "\n";
  }
  return os.str();
}

std::string inspect_firewall(const firewall::FirewallModel& fw) {
  std::ostringstream os;
  char buf[160];
  os << "firewall: metric " << firewall::to_string(fw.metric) << ", tau " << fw.tau << ", "
     << fw.calibrations.size() << " classes\n";
  os << "  class  loi  window    mu          sigma       samples\n";
  for (const auto& cal : fw.calibrations) {
    std::string window;
    for (std::size_t i = 0; i < cal.window.size(); ++i) window += (i ? "," : "") + std::to_string(cal.window[i]);
    std::snprintf(buf, sizeof buf, "  %-5zu  %-3zu  %-8s  %-10.6g  %-10.6g  %zu\n", cal.cls, cal.loi, window.c_str(),
                  cal.mu, cal.sigma, cal.sample_count);
    os << buf;
  }
  return os.str();
}

std::string inspect_dataset(const poison::DatasetFile& file) {
  std::ostringstream os;
  os << "dataset: " << file.samples.size() << " samples, " << file.num_classes << " classes";
  if (!file.samples.empty()) os << ", images " << shape_text(file.samples.front().input.shape());
  os << "\n  per class:";
  std::vector<std::size_t> counts(file.num_classes, 0);
  for (const auto& s : file.samples) ++counts.at(s.label);
  for (std::size_t c = 0; c < counts.size(); ++c) os << " " << c << ":" << counts[c];
  os << "\n";
  return os.str();
}

}  // namespace

std::string inspect_file(const fs::path& path) {
  const auto bytes = io::read_file(path);
  const std::string_view head(reinterpret_cast<const char*>(bytes.data()), std::min<std::size_t>(bytes.size(), 8));
  if (head.starts_with("LWFANET")) return inspect_network(nn::decode_network(bytes));
  if (head.starts_with("LWFAFWL")) return inspect_firewall(firewall::decode_firewall(bytes));
  if (head.starts_with("LWFADAT")) return inspect_dataset(poison::decode_dataset(bytes));
  throw DataError(path.string() + " is not a model, firewall or dataset file");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const ComputationError*>(&e)) return 4;
  return 1;
}

}  // namespace lwfa::cli
