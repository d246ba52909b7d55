#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acl/cli.hpp"

namespace {

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const acl::AclError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return acl::cli::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Angular contrastive loss laboratory"};
  app.set_version_flag("--version", std::string("acl-lab ") + acl::cli::kToolVersion);
  app.require_subcommand(1);

  std::string config_path;
  acl::cli::Overrides overrides;
  std::uint64_t seed_flag = 0;
  std::string output_dir_flag;

  auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "Override the config seed");
    cmd->add_option("--output-dir", output_dir_flag, "Override the config output_dir");
  };
  auto collect_overrides = [&](CLI::App* cmd) {
    acl::cli::Overrides o;
    if (cmd->count("--seed") > 0) o.seed = seed_flag;
    if (cmd->count("--output-dir") > 0) o.output_dir = output_dir_flag;
    return o;
  };

  CLI::App* gen = app.add_subcommand("gen-data", "Generate dataset CSVs from a config");
  gen->add_option("config", config_path, "Experiment config file")->required();
  add_overrides(gen);

  CLI::App* train = app.add_subcommand("train", "Run a training experiment");
  train->add_option("config", config_path, "Experiment config file")->required();
  add_overrides(train);

  std::string checkpoint_path, data_dir;
  CLI::App* probe = app.add_subcommand("probe", "Linear-probe a checkpoint on a dataset");
  probe->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
  probe->add_option("data", data_dir, "Directory holding train.csv and test.csv")
      ->required();
  probe->add_option("--output-dir", output_dir_flag, "Where to write probe.csv");

  std::string embeddings_csv;
  double t_param = 2.0;
  CLI::App* metrics = app.add_subcommand("metrics", "Uniformity and tolerance of embeddings");
  metrics->add_option("embeddings", embeddings_csv, "Embeddings CSV (label,feature_*)")
      ->required();
  metrics->add_option("--t", t_param, "Gaussian kernel scale t (default 2)");
  metrics->add_option("--output-dir", output_dir_flag, "Where to write metrics.csv");

  std::string axis;
  std::vector<double> values;
  CLI::App* sweep = app.add_subcommand("sweep", "Sweep tau or alpha with an alpha=1 baseline");
  sweep->add_option("config", config_path, "Experiment config file")->required();
  sweep->add_option("--axis", axis, "Sweep axis: tau | alpha")->required();
  sweep->add_option("--values", values, "Axis values")->required()->delimiter(',');
  add_overrides(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    return guarded([&] { return acl::cli::cmd_gen_data(config_path, collect_overrides(gen)); });
  }
  if (train->parsed()) {
    return guarded([&] { return acl::cli::cmd_train(config_path, collect_overrides(train)); });
  }
  if (probe->parsed()) {
    std::optional<std::string> out;
    if (probe->count("--output-dir") > 0) out = output_dir_flag;
    return guarded([&] { return acl::cli::cmd_probe(checkpoint_path, data_dir, out); });
  }
  if (metrics->parsed()) {
    std::optional<std::string> out;
    if (metrics->count("--output-dir") > 0) out = output_dir_flag;
    return guarded([&] { return acl::cli::cmd_metrics(embeddings_csv, t_param, out); });
  }
  if (sweep->parsed()) {
    return guarded(
        [&] { return acl::cli::cmd_sweep(config_path, axis, values, collect_overrides(sweep)); });
  }
  return 2;
}
