#include "acl/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <limits>

#include <json.hpp>

#include "acl/config.hpp"
#include "acl/io.hpp"
#include "acl/metrics.hpp"
#include "acl/training.hpp"

namespace acl {
namespace cli {

namespace {

using nlohmann::json;

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

config::ExperimentConfig load_with_overrides(const std::filesystem::path& config_path,
                                             const Overrides& overrides) {
  config::ExperimentConfig cfg = config::load_config(config_path);
  if (overrides.seed) {
    cfg.seed = *overrides.seed;
    cfg.dataset.synth.seed = *overrides.seed;
    cfg.dataset.audio.aug.seed = *overrides.seed;
  }
  if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
  cfg.validate();
  return cfg;
}

std::filesystem::path ensure_output_dir(const config::ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    raise(Err::ConfigError, "output_dir '" + cfg.output_dir + "' is not writable");
  }
  return dir;
}

json manifest_base(const std::string& command, const config::ExperimentConfig& cfg,
                   const std::string& started) {
  json m;
  m["command"] = command;
  m["tool_version"] = kToolVersion;
  m["seed"] = cfg.seed;
  m["config"] = config::serialize_config(cfg);
  m["started_utc"] = started;
  return m;
}

void write_manifest(const std::filesystem::path& dir, json m) {
  m["finished_utc"] = utc_now();
  io::write_file(dir / "manifest.json", m.dump(2) + "\n");
}

json final_metrics(const training::TrainRecord& last) {
  json f;
  f["epoch"] = last.epoch;
  f["loss_total"] = last.loss_total;
  f["loss_c"] = last.loss_c;
  f["loss_a"] = last.loss_a;
  f["uniformity"] = last.uniformity;
  f["tolerance"] = last.tolerance;
  f["probe_acc"] = last.probe_acc;
  return f;
}

}  // namespace

int exit_code_for(Err kind) {
  switch (kind) {
    case Err::ConfigError:
      return 2;
    case Err::DataError:
    case Err::TooShort:
    case Err::EmptyInput:
    case Err::LabelOutOfRange:
    case Err::LabelMismatch:
    case Err::TooFewSamples:
      return 3;
    default:
      return 4;
  }
}

int cmd_gen_data(const std::filesystem::path& config_path, const Overrides& overrides) {
  config::ExperimentConfig cfg = load_with_overrides(config_path, overrides);
  std::string started = utc_now();
  std::filesystem::path dir = ensure_output_dir(cfg);

  training::DataBundle bundle = training::load_data(cfg);
  data::save_dataset_csv(bundle.train, dir / "train.csv");
  data::save_dataset_csv(bundle.test, dir / "test.csv");

  json m = manifest_base("gen-data", cfg, started);
  m["outputs"] = {{"train", "train.csv"}, {"test", "test.csv"}};
  m["train_rows"] = bundle.train.size();
  m["test_rows"] = bundle.test.size();
  write_manifest(dir, m);

  std::cout << "wrote " << bundle.train.size() << " train rows and " << bundle.test.size()
            << " test rows (dim " << bundle.d_in << ") to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const std::filesystem::path& config_path, const Overrides& overrides) {
  config::ExperimentConfig cfg = load_with_overrides(config_path, overrides);
  std::string started = utc_now();
  std::filesystem::path dir = ensure_output_dir(cfg);

  training::TrainResult result = cfg.mode == config::Mode::Ssl
                                     ? training::train_ssl(cfg)
                                     : training::train_supervised(cfg);

  io::write_file(dir / "records.csv", training::records_csv(result.records));
  const encoder::LinearClassifier* cls =
      result.classifier ? &*result.classifier : nullptr;
  encoder::save_checkpoint(result.params, dir / "checkpoint.bin", cls);

  json m = manifest_base("train", cfg, started);
  m["outputs"] = {{"records", "records.csv"}, {"checkpoint", "checkpoint.bin"}};
  m["final"] = final_metrics(result.records.back());
  m["wall_ms"] = result.wall_ms;
  write_manifest(dir, m);

  const training::TrainRecord& last = result.records.back();
  std::cout << (cfg.mode == config::Mode::Ssl ? "ssl" : "supervised") << " run: "
            << cfg.epochs << " epochs in " << io::fmt_double(result.wall_ms) << " ms\n"
            << "final loss_total " << io::fmt_double(last.loss_total) << " (c "
            << io::fmt_double(last.loss_c) << ", a " << io::fmt_double(last.loss_a)
            << ")\n"
            << "uniformity " << io::fmt_double(last.uniformity) << ", tolerance "
            << io::fmt_double(last.tolerance) << ", "
            << (cfg.mode == config::Mode::Ssl ? "probe_acc " : "test_acc ")
            << io::fmt_double(last.probe_acc) << "\n"
            << "artifacts in " << dir.string() << "\n";
  return 0;
}

int cmd_probe(const std::filesystem::path& checkpoint_path,
              const std::filesystem::path& data_dir,
              const std::optional<std::string>& output_dir) {
  encoder::Checkpoint ckpt = encoder::load_checkpoint(checkpoint_path);
  data::Dataset train = data::load_dataset_csv(data_dir / "train.csv");
  data::Dataset test = data::load_dataset_csv(data_dir / "test.csv");
  if (train.x.cols != ckpt.params.d_in || test.x.cols != ckpt.params.d_in) {
    raise(Err::DataError, "dataset dim " + std::to_string(train.x.cols) +
                              " does not match checkpoint input dim " +
                              std::to_string(ckpt.params.d_in));
  }

  auto train_emb = metrics::LabeledEmbeddings::create(
      encoder::forward_eval(ckpt.params, train.x).h, train.labels);
  auto test_emb = metrics::LabeledEmbeddings::create(
      encoder::forward_eval(ckpt.params, test.x).h, test.labels);
  std::vector<int> pred = metrics::linear_probe_predict(train_emb, test_emb, 200, 0.5, 0);
  metrics::ClassAccuracy cw = metrics::class_wise_accuracy(pred, test.labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == test.labels[i]) ++hits;
  }
  double acc = static_cast<double>(hits) / static_cast<double>(pred.size());

  std::string csv = "class,accuracy\n";
  for (const auto& [cls, a] : cw.per_class) {
    csv += std::to_string(cls) + "," + io::fmt_double(a) + "\n";
  }
  csv += "macro," + io::fmt_double(cw.macro) + "\n";
  csv += "overall," + io::fmt_double(acc) + "\n";

  std::cout << "probe accuracy " << io::fmt_double(acc) << " (macro "
            << io::fmt_double(cw.macro) << ") over " << pred.size() << " test rows\n";
  for (const auto& [cls, a] : cw.per_class) {
    std::cout << "  class " << cls << ": " << io::fmt_double(a) << "\n";
  }
  if (output_dir) {
    std::filesystem::path dir(*output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
      raise(Err::ConfigError, "output_dir '" + *output_dir + "' is not writable");
    }
    io::write_file(dir / "probe.csv", csv);
    std::cout << "wrote " << (dir / "probe.csv").string() << "\n";
  }
  return 0;
}

int cmd_metrics(const std::filesystem::path& embeddings_csv, double t,
                const std::optional<std::string>& output_dir) {
  if (!(t > 0.0)) raise(Err::ConfigError, "metrics t must be > 0");
  data::Dataset ds = data::load_dataset_csv(embeddings_csv);
  auto emb = metrics::LabeledEmbeddings::create(ds.x, ds.labels);
  metrics::MetricReport report;
  report.t_param = t;
  report.n_samples = emb.size();
  report.uniformity = metrics::uniformity(emb, t);
  report.tolerance = metrics::tolerance(emb);

  std::cout << "n " << report.n_samples << ", uniformity "
            << io::fmt_double(report.uniformity) << ", tolerance "
            << io::fmt_double(report.tolerance) << " (t " << io::fmt_double(t) << ")\n";
  if (output_dir) {
    std::filesystem::path dir(*output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
      raise(Err::ConfigError, "output_dir '" + *output_dir + "' is not writable");
    }
    std::string csv = std::string(metrics::MetricReport::csv_header()) + "\n" +
                      report.csv_row(0, std::numeric_limits<double>::quiet_NaN()) + "\n";
    io::write_file(dir / "metrics.csv", csv);
    std::cout << "wrote " << (dir / "metrics.csv").string() << "\n";
  }
  return 0;
}

int cmd_sweep(const std::filesystem::path& config_path, const std::string& axis,
              const std::vector<double>& values, const Overrides& overrides) {
  config::ExperimentConfig cfg = load_with_overrides(config_path, overrides);
  training::SweepAxis ax;
  if (axis == "tau") {
    ax = training::SweepAxis::Tau;
  } else if (axis == "alpha") {
    ax = training::SweepAxis::Alpha;
  } else {
    raise(Err::ConfigError, "sweep axis must be tau or alpha, got '" + axis + "'");
  }
  if (values.empty()) raise(Err::ConfigError, "sweep needs at least one --values entry");

  std::string started = utc_now();
  std::filesystem::path dir = ensure_output_dir(cfg);
  std::vector<training::SweepRow> rows = training::sweep(cfg, ax, values);
  std::string filename = "sweep_" + axis + ".csv";
  io::write_file(dir / filename, training::sweep_csv(rows));

  json m = manifest_base("sweep", cfg, started);
  m["axis"] = axis;
  m["values"] = values;
  m["outputs"] = {{"sweep", filename}};
  write_manifest(dir, m);

  std::cout << "sweep over " << axis << " (" << values.size() << " values, 2 variants)\n";
  for (const auto& r : rows) {
    std::cout << "  " << axis << " " << io::fmt_double(r.value) << " " << r.variant
              << ": uniformity " << io::fmt_double(r.uniformity) << ", tolerance "
              << io::fmt_double(r.tolerance) << ", probe_acc "
              << io::fmt_double(r.probe_acc) << "\n";
  }
  std::cout << "wrote " << (dir / filename).string() << "\n";
  return 0;
}

}  // namespace cli
}  // namespace acl
