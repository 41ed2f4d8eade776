#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lwfa/eval/sweeps.hpp"

namespace lwfa::eval {

/// A table written twice: as CSV (first line `# name master_seed=.. config_digest=..`,
/// then the header) and as a JSON document carrying the same cells.
struct Report {
  std::string name;
  std::uint64_t master_seed = 0;
  std::string config_digest;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;  // numbers, integers or strings
};

std::string to_csv(const Report& report);
nlohmann::json to_json(const Report& report);

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`; returns both paths.
std::vector<std::filesystem::path> write_report(const Report& report, const std::filesystem::path& dir);

Report attack_report(const AttackMetrics& m, std::uint64_t seed, const std::string& digest);
Report detection_report(const DetectionMetrics& m, double tau, firewall::Metric metric, std::uint64_t seed,
                        const std::string& digest);
Report threshold_report(std::span<const ThresholdRow> rows, std::uint64_t seed, const std::string& digest);
Report layer_report(std::span<const LayerRow> rows, std::uint64_t seed, const std::string& digest);
Report metric_report(std::span<const MetricRow> rows, std::uint64_t seed, const std::string& digest);
Report rate_report(std::span<const PipelineRow> rows, std::uint64_t seed, const std::string& digest);
Report beta_report(std::span<const PipelineRow> rows, std::uint64_t seed, const std::string& digest);

}  // namespace lwfa::eval
