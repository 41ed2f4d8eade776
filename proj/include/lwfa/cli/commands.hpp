#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lwfa/eval/experiment.hpp"

namespace lwfa::cli {

inline constexpr const char* kToolVersion = "1.0.0";

struct SweepGrids {
  std::vector<double> taus;
  std::vector<double> rates;
  std::vector<double> betas;
};

struct RunConfig {
  eval::ExperimentConfig experiment;
  SweepGrids sweeps;
  std::filesystem::path output_dir = "lwfa-out";
};

RunConfig default_run_config();

/// Parses a config document; keys left out keep their defaults and unknown
/// keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Digest over everything that affects results (the output directory does
/// not).
std::string run_config_digest(const RunConfig& cfg);

/// Files inside the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path train_data() const { return root / "data" / "train.dat"; }
  std::filesystem::path test_data() const { return root / "data" / "test.dat"; }
  std::filesystem::path model() const { return root / "model.net"; }
  std::filesystem::path poison_manifest() const { return root / "poison_manifest.json"; }
  std::filesystem::path firewall() const { return root / "firewall.fw"; }
  std::filesystem::path profiles() const { return root / "profiles.csv"; }
  std::filesystem::path run_manifest(const std::string& command) const {
    return root / ("manifest_" + command + ".json");
  }
};

/// Stage bookkeeping for one command. The manifest is written even when a
/// stage throws; it then names the failing stage.
class RunManifest {
 public:
  RunManifest(std::string command, const RunConfig& cfg);

  template <class F>
  auto stage(const std::string& name, F&& body) {
    current_ = name;
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish_stage(name, start);
    } else {
      auto result = body();
      finish_stage(name, start);
      return result;
    }
  }

  void add_artifact(const std::filesystem::path& path);
  void add_artifacts(const std::vector<std::filesystem::path>& paths);
  void fail(const std::string& error);
  const std::string& current_stage() const { return current_; }

  nlohmann::json to_json() const;
  /// Best effort; never throws.
  void write(const std::filesystem::path& path) const noexcept;

 private:
  void finish_stage(const std::string& name, std::chrono::steady_clock::time_point start);

  std::string command_;
  std::string digest_;
  std::uint64_t seed_ = 0;
  std::string current_;
  std::vector<std::string> artifacts_;
  std::vector<std::pair<std::string, double>> timings_;
  bool failed_ = false;
  std::string failed_stage_;
  std::string error_;
};

void cmd_gen_data(const RunConfig& cfg, RunManifest& manifest);
void cmd_run_attack(const RunConfig& cfg, RunManifest& manifest);
void cmd_defend(const RunConfig& cfg, RunManifest& manifest);

enum class SweepKind { tau, rate, layer, beta, metric };
SweepKind sweep_kind_from_string(const std::string& name);
void cmd_sweep(const RunConfig& cfg, SweepKind kind, RunManifest& manifest);

/// Human-readable summary of a model, firewall or dataset file.
std::string inspect_file(const std::filesystem::path& path);

/// Exit status for an exception escaping a command: 2 configuration,
/// 3 data, 4 computation, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace lwfa::cli
