#include "lwfa/eval/report.hpp"

#include <cstdio>

#include "lwfa/binary_io.hpp"
#include "lwfa/error.hpp"

namespace lwfa::eval {

namespace {

std::string cell_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return v.dump();
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
    return buf;
  }
  throw ComputationError("unsupported report cell");
}

std::vector<std::string> detection_columns() {
  return {"tpr", "fpr", "true_positives", "poisoned_total", "false_positives", "benign_total"};
}

void append_detection(std::vector<nlohmann::json>& row, const DetectionMetrics& m) {
  row.insert(row.end(), {m.tpr, m.fpr, m.true_positives, m.poisoned_total, m.false_positives, m.benign_total});
}

Report base(std::string name, std::uint64_t seed, const std::string& digest, std::vector<std::string> lead,
            bool with_detection) {
  Report r{std::move(name), seed, digest, std::move(lead), {}};
  if (with_detection) {
    const auto d = detection_columns();
    r.columns.insert(r.columns.end(), d.begin(), d.end());
  }
  return r;
}

}  // namespace

std::string to_csv(const Report& report) {
  std::string out = "# " + report.name + " master_seed=" + std::to_string(report.master_seed) +
                    " config_digest=" + report.config_digest + "\n";
  for (std::size_t i = 0; i < report.columns.size(); ++i) out += (i ? "," : "") + report.columns[i];
  out += "\n";
  for (const auto& row : report.rows) {
    if (row.size() != report.columns.size()) throw ComputationError("report row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell_text(row[i]);
    out += "\n";
  }
  return out;
}

nlohmann::json to_json(const Report& report) {
  nlohmann::json j;
  j["report"] = report.name;
  j["master_seed"] = report.master_seed;
  j["config_digest"] = report.config_digest;
  j["columns"] = report.columns;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json obj;
    for (std::size_t i = 0; i < row.size(); ++i) obj[report.columns.at(i)] = row[i];
    j["rows"].push_back(std::move(obj));
  }
  return j;
}

std::vector<std::filesystem::path> write_report(const Report& report, const std::filesystem::path& dir) {
  const auto csv = dir / (report.name + ".csv");
  const auto json = dir / (report.name + ".json");
  io::write_text_file(csv, to_csv(report));
  io::write_text_file(json, to_json(report).dump(2) + "\n");
  return {csv, json};
}

Report attack_report(const AttackMetrics& m, std::uint64_t seed, const std::string& digest) {
  auto r = base("attack_metrics", seed, digest, {"ma", "asr", "correct", "benign_total", "hits", "poisoned_total"},
                false);
  r.rows.push_back({m.ma, m.asr, m.correct, m.benign_total, m.hits, m.poisoned_total});
  return r;
}

Report detection_report(const DetectionMetrics& m, double tau, firewall::Metric metric, std::uint64_t seed,
                        const std::string& digest) {
  auto r = base("detection_metrics", seed, digest, {"tau", "metric"}, true);
  std::vector<nlohmann::json> row{tau, std::string(firewall::to_string(metric))};
  append_detection(row, m);
  r.rows.push_back(std::move(row));
  return r;
}

Report threshold_report(std::span<const ThresholdRow> rows, std::uint64_t seed, const std::string& digest) {
  auto r = base("sweep_tau", seed, digest, {"tau"}, true);
  for (const auto& t : rows) {
    std::vector<nlohmann::json> row{t.tau};
    append_detection(row, t.detection);
    r.rows.push_back(std::move(row));
  }
  return r;
}

Report layer_report(std::span<const LayerRow> rows, std::uint64_t seed, const std::string& digest) {
  auto r = base("sweep_layer", seed, digest, {"layer", "loi_per_class"}, true);
  for (const auto& l : rows) {
    std::string lois;
    for (std::size_t i = 0; i < l.loi.size(); ++i) lois += (i ? ";" : "") + std::to_string(l.loi[i]);
    std::vector<nlohmann::json> row{l.tap ? std::to_string(l.tap) : std::string("ours"), lois};
    append_detection(row, l.detection);
    r.rows.push_back(std::move(row));
  }
  return r;
}

Report metric_report(std::span<const MetricRow> rows, std::uint64_t seed, const std::string& digest) {
  auto r = base("sweep_metric", seed, digest, {"metric", "tau"}, true);
  for (const auto& m : rows) {
    std::vector<nlohmann::json> row{std::string(firewall::to_string(m.metric)), m.tau};
    append_detection(row, m.detection);
    r.rows.push_back(std::move(row));
  }
  return r;
}

namespace {
Report pipeline_report(const char* name, const char* param, std::span<const PipelineRow> rows, std::uint64_t seed,
                       const std::string& digest) {
  auto r = base(name, seed, digest, {param, "ma", "asr"}, true);
  for (const auto& p : rows) {
    std::vector<nlohmann::json> row{p.value, p.attack.ma, p.attack.asr};
    append_detection(row, p.detection);
    r.rows.push_back(std::move(row));
  }
  return r;
}
}  // namespace

Report rate_report(std::span<const PipelineRow> rows, std::uint64_t seed, const std::string& digest) {
  return pipeline_report("sweep_rate", "poison_rate", rows, seed, digest);
}

Report beta_report(std::span<const PipelineRow> rows, std::uint64_t seed, const std::string& digest) {
  return pipeline_report("sweep_beta", "beta", rows, seed, digest);
}

}  // namespace lwfa::eval
