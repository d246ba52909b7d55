#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acl/config.hpp"
#include "acl/data.hpp"
#include "acl/encoder.hpp"

namespace acl {
namespace training {

struct OptimizerState {
  config::OptKind kind = config::OptKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Vector> m, v;   // Adam moments, one buffer per parameter tensor
  std::uint64_t step_count = 0;

  static OptimizerState create(config::OptKind kind, double lr,
                               const std::vector<encoder::TensorRef>& params);

  // One update; grads must match the creation-time tensor list in order and
  // shape. Adam uses bias-corrected moments.
  void apply(const std::vector<encoder::TensorRef>& params,
             const std::vector<encoder::TensorRef>& grads);
};

// One line of records.csv. wall_ms is pinned to 0 so reruns are
// byte-identical; real timing lives in the run manifest.
struct TrainRecord {
  std::size_t epoch = 0;
  double loss_total = 0.0;
  double loss_c = 0.0;
  double loss_a = 0.0;
  double uniformity = 0.0;
  double tolerance = 0.0;
  double probe_acc = 0.0;   // NaN on epochs without a probe
  double wall_ms = 0.0;
};

std::string records_csv_header();
std::string record_csv_row(const TrainRecord& r);
std::string records_csv(const std::vector<TrainRecord>& records);

// Train/test feature views plus, for audio, the full-width patches that the
// per-epoch augmentation pipeline crops from.
struct DataBundle {
  bool patch_mode = false;
  data::Dataset train;   // eval-view rows (audio: flattened center crops)
  data::Dataset test;
  std::vector<data::TFPatch> train_patches;
  std::size_t d_in = 0;
};

DataBundle load_data(const config::ExperimentConfig& cfg);

struct TrainResult {
  encoder::EncoderParams params;
  std::optional<encoder::LinearClassifier> classifier;   // supervised runs only
  std::vector<TrainRecord> records;                      // epoch 0 = pre-training state
  double wall_ms = 0.0;                                  // measured, not recorded in csv
};

// Self-supervised run: two augmented views per item, combined loss with the
// contrastive gradient entering at z and the margin gradient at h.
TrainResult train_ssl(const config::ExperimentConfig& cfg);

// Supervised run: encoder + linear classifier under CE at the logits and the
// margin at h, positives taken from the labels.
TrainResult train_supervised(const config::ExperimentConfig& cfg);

enum class SweepAxis { Tau, Alpha };

struct SweepRow {
  double value = 0.0;
  std::string variant;   // "acl" or "baseline"
  double uniformity = 0.0;
  double tolerance = 0.0;
  double probe_acc = 0.0;
};

// One full seeded SSL run per (value, variant); the baseline fixes alpha = 1.
// Points run in parallel up to the ACL_LAB_THREADS cap; output order and
// content do not depend on the thread count.
std::vector<SweepRow> sweep(const config::ExperimentConfig& cfg, SweepAxis axis,
                            const std::vector<double>& values);

std::string sweep_csv(const std::vector<SweepRow>& rows);

// ACL_LAB_THREADS if set (must be a positive integer), else hardware
// concurrency.
std::size_t worker_cap();

}  // namespace training
}  // namespace acl
