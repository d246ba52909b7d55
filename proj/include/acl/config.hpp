#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acl/data.hpp"
#include "acl/losses.hpp"
#include "acl/metrics.hpp"

namespace acl {
namespace config {

enum class Mode { Ssl, Supervised };
enum class OptKind { Adam, Sgd };
enum class DatasetKind { Synthetic, Audio };

struct MetricsConfig {
  double t = 2.0;
  std::size_t probe_every = 10;    // probe cadence in epochs; final epoch always probed
  std::size_t probe_epochs = 200;
  double probe_lr = 0.5;
  metrics::ToleranceNorm tolerance_norm = metrics::ToleranceNorm::AllPairs;
};

struct EncoderConfig {
  std::vector<std::size_t> hidden{64};
  std::size_t d_h = 32;
  std::size_t g_hidden = 32;
  std::size_t d_z = 16;
  double bn_momentum = 0.9;
};

struct OptimizerConfig {
  OptKind kind = OptKind::Adam;
  double lr = 1e-3;
  std::size_t batch = 64;
};

struct AudioDatasetConfig {
  std::string root;
  std::size_t n_mels = 40;
  std::size_t frame_len = 256;
  std::size_t hop = 128;
  std::size_t target_frames = 32;
  double test_fraction = 0.2;
  data::AugmentationConfig aug;
};

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Synthetic;
  data::SyntheticDatasetSpec synth;        // seed filled from the experiment seed
  std::size_t n_test_per_class = 50;
  data::VectorAugmentConfig vec_aug;
  AudioDatasetConfig audio;
};

// Everything a run needs; the seed is the only source of randomness and
// output_dir the only destination. Serialization is canonical so a parsed
// config re-serializes byte-identically.
struct ExperimentConfig {
  Mode mode = Mode::Ssl;
  std::uint64_t seed = 0;
  std::size_t epochs = 100;
  std::string output_dir;
  losses::LossConfig loss;
  MetricsConfig metrics;
  EncoderConfig encoder;
  OptimizerConfig optimizer;
  DatasetConfig dataset;

  void validate() const;
};

// key = value lines grouped in [section] blocks; '#' lines are comments.
// Unknown keys, duplicates, and malformed values raise Err::ConfigError with
// "<source>:<line>: ..." diagnostics. Missing required fields name the field.
ExperimentConfig parse_config(const std::string& text, const std::string& source_name);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical form: every key materialized, fixed order, shortest round-trip
// floats. parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace config
}  // namespace acl
