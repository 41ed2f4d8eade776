// lwfa: command-line driver for the attack / defense pipeline.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lwfa/cli/commands.hpp"
#include "lwfa/error.hpp"

using namespace lwfa;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tau;
  std::optional<std::string> metric;
  std::optional<double> beta;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config file (defaults apply to missing keys)");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--tau", o.tau, "detection threshold");
  sub->add_option("--metric", o.metric, "cosine or euclidean");
  sub->add_option("--beta", o.beta, "adaptive-attack weight");
}

cli::RunConfig resolve(const Overrides& o) {
  auto j = cli::run_config_to_json(o.config.empty() ? cli::default_run_config() : cli::load_run_config(o.config));
  if (o.seed) j["seed"] = *o.seed;
  if (o.out) j["output_dir"] = *o.out;
  if (o.tau) j["defense"]["tau"] = *o.tau;
  if (o.metric) j["defense"]["metric"] = *o.metric;
  if (o.beta) j["attack"]["beta"] = *o.beta;
  // round-trip so overrides get the same validation as file values
  return cli::run_config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-wise feature analysis backdoor attack/defense pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kToolVersion);

  Overrides o;
  std::string kind;
  std::string inspect_path;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic train/test sets");
  auto* attack = app.add_subcommand("run-attack", "poison, train, and report MA/ASR");
  auto* defend = app.add_subcommand("defend", "calibrate the firewall and report TPR/FPR");
  auto* sweep = app.add_subcommand("sweep", "run one of the evaluation sweeps");
  auto* inspect = app.add_subcommand("inspect", "summarize a model, firewall or dataset file");
  for (auto* sub : {gen, attack, defend, sweep}) add_common(sub, o);
  sweep->add_option("--kind", kind, "tau, rate, layer, beta or metric")->required();
  inspect->add_option("path", inspect_path, "file to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (inspect->parsed()) {
    try {
      std::cout << cli::inspect_file(inspect_path);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return cli::exit_code_for(e);
    }
  }

  const std::string command = app.get_subcommands().front()->get_name();
  cli::RunConfig cfg;
  try {
    cfg = resolve(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (o.out) {
      cli::RunConfig fallback = cli::default_run_config();
      cli::RunManifest manifest(command, fallback);
      manifest.fail(e.what());
      manifest.write(cli::Layout{*o.out}.run_manifest(command));
    }
    return cli::exit_code_for(e);
  }

  cli::RunManifest manifest(command, cfg);
  const auto manifest_path = cli::Layout{cfg.output_dir}.run_manifest(command == "sweep" ? "sweep_" + kind : command);
  try {
    if (gen->parsed()) {
      cli::cmd_gen_data(cfg, manifest);
    } else if (attack->parsed()) {
      cli::cmd_run_attack(cfg, manifest);
    } else if (defend->parsed()) {
      cli::cmd_defend(cfg, manifest);
    } else {
      cli::cmd_sweep(cfg, cli::sweep_kind_from_string(kind), manifest);
    }
  } catch (const std::exception& e) {
    manifest.fail(e.what());
    manifest.write(manifest_path);
    std::cerr << "error [" << manifest.to_json()["failed_stage"].get<std::string>() << "]: " << e.what() << "\n";
    return cli::exit_code_for(e);
  }
  manifest.write(manifest_path);
  std::cout << command << ": ok -> " << cfg.output_dir.string() << "\n";
  return 0;
}
