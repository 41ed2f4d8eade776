#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "lwfa/binary_io.hpp"
#include "lwfa/cli/commands.hpp"
#include "lwfa/error.hpp"
#include "lwfa/eval/metrics.hpp"
#include "lwfa/firewall/firewall.hpp"
#include "lwfa/nn/model_io.hpp"
#include "lwfa/poison/dataset_io.hpp"

using namespace lwfa;
using namespace lwfa::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tiny_json(const fs::path& out) {
  auto j = json::parse(R"({
    "seed": 9,
    "dataset": {"train_count": 300, "test_count": 200},
    "model": {"blocks": "c8,c8,c8p,c16,c16p,d32"},
    "train": {"epochs": 2, "lr_decay_epochs": [1]},
    "sweeps": {"rates": [0.05], "betas": [0.0, 0.5]}
  })");
  j["output_dir"] = out.string();
  return j;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lwfa_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> csv_rows(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  return rows;
}

void run_all(const RunConfig& cfg) {
  RunManifest m1("gen-data", cfg), m2("run-attack", cfg), m3("defend", cfg);
  cmd_gen_data(cfg, m1);
  cmd_run_attack(cfg, m2);
  cmd_defend(cfg, m3);
}

}  // namespace

TEST(RunConfigTest, DefaultsOverridesAndStrictness) {
  const auto cfg = run_config_from_json(json::object());
  EXPECT_EQ(cfg.experiment.defense.tau, 2.5);
  EXPECT_EQ(cfg.sweeps.taus, (std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5, 3.0}));
  EXPECT_EQ(cfg.sweeps.rates, (std::vector<double>{0.01, 0.03, 0.05, 0.10}));

  const auto j = tiny_json("somewhere");
  const auto parsed = run_config_from_json(j);
  EXPECT_EQ(parsed.output_dir, fs::path("somewhere"));
  EXPECT_EQ(parsed.experiment.seed, 9u);
  EXPECT_EQ(run_config_from_json(run_config_to_json(parsed)).experiment.blocks, parsed.experiment.blocks);

  auto moved = j;
  moved["output_dir"] = "elsewhere";
  EXPECT_EQ(run_config_digest(run_config_from_json(moved)), run_config_digest(parsed));
  auto reseeded = j;
  reseeded["seed"] = 10;
  EXPECT_NE(run_config_digest(run_config_from_json(reseeded)), run_config_digest(parsed));

  auto bad = j;
  bad["sweeps"]["kinds"] = json::array();
  EXPECT_THROW(run_config_from_json(bad), ConfigError);
  bad = j;
  bad["sweeps"]["taus"] = {1.0, -1.0};
  EXPECT_THROW(run_config_from_json(bad), ConfigError);
  bad = j;
  bad["defense"]["metric"] = "l1";
  EXPECT_THROW(run_config_from_json(bad), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/lwfa.json"), ConfigError);
}

TEST(RunConfigTest, SweepKinds) {
  EXPECT_EQ(sweep_kind_from_string("tau"), SweepKind::tau);
  EXPECT_EQ(sweep_kind_from_string("metric"), SweepKind::metric);
  EXPECT_THROW(sweep_kind_from_string("lambda"), ConfigError);
}

TEST(ExitCodes, OnePerFamily) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(DataError("x")), 3);
  EXPECT_EQ(exit_code_for(ComputationError("x")), 4);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fresh_dir("pipeline"));
    cfg_ = new RunConfig(run_config_from_json(tiny_json(*dir_)));
    run_all(*cfg_);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete cfg_;
    delete dir_;
  }
  static Layout out() { return {*dir_}; }

  static inline fs::path* dir_ = nullptr;
  static inline RunConfig* cfg_ = nullptr;
};

TEST_F(Pipeline, GenDataHeadersMatchConfig) {
  const auto train = poison::load_dataset(out().train_data());
  const auto test = poison::load_dataset(out().test_data());
  EXPECT_EQ(train.samples.size(), 300u);
  EXPECT_EQ(test.samples.size(), 200u);
  EXPECT_EQ(train.num_classes, 10u);
  EXPECT_EQ(train.samples.front().input.shape(), (nn::Shape{3, 16, 16}));
}

TEST_F(Pipeline, AttackReportReevaluates) {
  const auto report = json::parse(slurp(out().root / "attack_metrics.json"));
  const auto& row = report["rows"][0];
  for (const char* k : {"ma", "asr"}) {
    EXPECT_GE(row[k].get<double>(), 0.0);
    EXPECT_LE(row[k].get<double>(), 100.0);
  }
  const auto net = nn::load_network(out().model());
  const auto test = poison::load_dataset(out().test_data()).samples;
  eval::DataBundle data{poison::load_dataset(out().train_data()).samples, test, 10};
  const auto poisoned = eval::make_poisoned_test(cfg_->experiment, data);
  const auto m = eval::attack_metrics(net, test, poisoned.samples, 0);
  EXPECT_EQ(row["asr"].get<double>(), m.asr);
  EXPECT_EQ(row["ma"].get<double>(), m.ma);
  EXPECT_EQ(report["config_digest"], run_config_digest(*cfg_));

  const auto manifest = poison::load_poison_manifest(out().poison_manifest());
  EXPECT_EQ(manifest.poisoned_indices.size(), 15u);
}

TEST_F(Pipeline, DefendReportSurvivesFirewallReload) {
  const auto fw = firewall::load_firewall(out().firewall());
  EXPECT_EQ(fw.tau, 2.5);
  const auto net = nn::load_network(out().model());
  eval::DataBundle data{poison::load_dataset(out().train_data()).samples,
                        poison::load_dataset(out().test_data()).samples, 10};
  const auto split = eval::split_calibration(data.test, 10, 0.1, eval::stage_seeds(9).calibration);
  const auto d = eval::detection_metrics(net, fw, eval::gather(data.test, split.evaluation),
                                         eval::make_poisoned_test(cfg_->experiment, data).samples);
  const auto report = json::parse(slurp(out().root / "detection_metrics.json"));
  const auto& row = report["rows"][0];
  EXPECT_EQ(row["tpr"].get<double>(), d.tpr);
  EXPECT_EQ(row["fpr"].get<double>(), d.fpr);
  EXPECT_EQ(row["true_positives"].get<std::size_t>(), d.true_positives);
  EXPECT_EQ(row["false_positives"].get<std::size_t>(), d.false_positives);

  // one row per analyzed layer
  EXPECT_EQ(csv_rows(out().profiles()).size(), 1 + scope::analysis_range(net.tap_count()).size());
}

TEST_F(Pipeline, SweepRowCountsAndCrossChecks) {
  RunManifest m("sweep", *cfg_);
  cmd_sweep(*cfg_, SweepKind::tau, m);
  cmd_sweep(*cfg_, SweepKind::layer, m);
  cmd_sweep(*cfg_, SweepKind::metric, m);
  const auto tau = csv_rows(out().root / "sweep_tau.csv");
  const auto layer = csv_rows(out().root / "sweep_layer.csv");
  const auto metric = csv_rows(out().root / "sweep_metric.csv");
  EXPECT_EQ(tau.size(), 1u + 6);
  const auto L = nn::load_network(out().model()).tap_count();
  EXPECT_EQ(layer.size(), 1u + L + 1);
  ASSERT_EQ(metric.size(), 1u + 12);
  for (std::size_t i = 1; i <= 6; ++i) EXPECT_EQ(metric[i], "cosine," + tau[i]);
  for (std::size_t i = 7; i <= 12; ++i) EXPECT_EQ(metric[i].rfind("euclidean,", 0), 0u);
  for (const auto& a : m.to_json()["artifacts"]) EXPECT_TRUE(fs::exists(a.get<std::string>()));
}

TEST_F(Pipeline, RerunIsByteIdentical) {
  const auto other = fresh_dir("rerun");
  auto j = tiny_json(other);
  const auto cfg = run_config_from_json(j);
  run_all(cfg);
  for (const char* f : {"data/train.dat", "data/test.dat", "model.net", "poison_manifest.json", "firewall.fw",
                        "profiles.csv", "attack_metrics.csv", "attack_metrics.json", "detection_metrics.csv",
                        "detection_metrics.json"}) {
    EXPECT_EQ(slurp(other / f), slurp(*dir_ / f)) << f;
  }
  fs::remove_all(other);
}

TEST_F(Pipeline, InspectSummaries) {
  EXPECT_NE(inspect_file(out().model()).find("taps"), std::string::npos);
  EXPECT_NE(inspect_file(out().firewall()).find("metric cosine"), std::string::npos);
  EXPECT_NE(inspect_file(out().test_data()).find("200 samples"), std::string::npos);
  EXPECT_THROW(inspect_file(out().profiles()), DataError);
}

TEST(Manifest, WrittenOnFailureWithStage) {
  const auto dir = fresh_dir("failure");
  const auto cfg = run_config_from_json(tiny_json(dir));
  RunManifest m("defend", cfg);
  try {
    cmd_defend(cfg, m);
    FAIL() << "defend without data should throw";
  } catch (const DataError& e) {
    m.fail(e.what());
  }
  m.write(Layout{dir}.run_manifest("defend"));
  const auto j = json::parse(slurp(Layout{dir}.run_manifest("defend")));
  EXPECT_EQ(j["status"], "failed");
  EXPECT_EQ(j["failed_stage"], "load-data");
  EXPECT_EQ(j["config_digest"], run_config_digest(cfg));
  EXPECT_EQ(j["tool_version"], kToolVersion);
  fs::remove_all(dir);
}

#ifdef LWFA_CLI_PATH
TEST(Binary, ExitStatusPerErrorFamily) {
  const auto dir = fresh_dir("binary");
  fs::create_directories(dir);
  const std::string cli = LWFA_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(run("sweep --kind tau --tau -1 --out " + dir.string()), 2);
  EXPECT_EQ(run("defend --out " + dir.string()), 3);
  EXPECT_TRUE(fs::exists(dir / "manifest_defend.json"));
  EXPECT_EQ(run("inspect " + (dir / "manifest_defend.json").string()), 3);
  EXPECT_EQ(run("frobnicate"), 2);

  std::ofstream(dir / "cfg.json") << tiny_json(dir).dump();
  EXPECT_EQ(run("gen-data --config " + (dir / "cfg.json").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "data" / "test.dat"));
  const auto j = json::parse(slurp(dir / "manifest_gen-data.json"));
  EXPECT_EQ(j["status"], "ok");
  for (const auto& a : j["artifacts"]) EXPECT_TRUE(fs::exists(a.get<std::string>()));
  fs::remove_all(dir);
}
#endif
