#include "acl/config.hpp"

#include <map>
#include <set>

#include "acl/error.hpp"
#include "acl/io.hpp"

namespace acl {
namespace config {

namespace {

struct RawValue {
  std::string value;
  int line = 0;
};

// Parsed key/value lines grouped by section, with one-shot consumption so
// leftovers can be reported as unknown keys.
class RawConfig {
 public:
  RawConfig(const std::string& text, std::string source) : source_(std::move(source)) {
    std::vector<std::string> lines = io::split(text, '\n');
    std::string section;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      int line_no = static_cast<int>(i) + 1;
      std::string line = io::trim(lines[i]);
      if (line.empty() || line[0] == '#') continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(line_no, "unterminated section header");
        section = io::trim(line.substr(1, line.size() - 2));
        if (section.empty()) fail(line_no, "empty section name");
        continue;
      }
      std::size_t eq = line.find('=');
      if (eq == std::string::npos) fail(line_no, "expected key = value");
      std::string key = io::trim(line.substr(0, eq));
      std::string value = io::trim(line.substr(eq + 1));
      if (key.empty()) fail(line_no, "empty key");
      auto [it, inserted] = entries_[section].emplace(key, RawValue{value, line_no});
      if (!inserted) fail(line_no, "duplicate key '" + qualify(section, key) + "'");
    }
  }

  const std::string& source() const { return source_; }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    raise(Err::ConfigError, source_ + ":" + std::to_string(line) + ": " + msg);
  }

  [[noreturn]] void missing(const std::string& section, const std::string& key) const {
    raise(Err::ConfigError,
          source_ + ": missing required field '" + qualify(section, key) + "'");
  }

  bool has(const std::string& section, const std::string& key) const {
    auto sit = entries_.find(section);
    return sit != entries_.end() && sit->second.count(key) > 0;
  }

  std::string require_string(const std::string& section, const std::string& key) {
    if (!has(section, key)) missing(section, key);
    return take(section, key).value;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) {
    if (!has(section, key)) return fallback;
    return take(section, key).value;
  }

  double require_double(const std::string& section, const std::string& key) {
    return to_double(take_required(section, key), section, key);
  }

  double get_double(const std::string& section, const std::string& key, double fallback) {
    if (!has(section, key)) return fallback;
    return to_double(take(section, key), section, key);
  }

  std::uint64_t require_u64(const std::string& section, const std::string& key) {
    return to_u64(take_required(section, key), section, key);
  }

  std::size_t require_size(const std::string& section, const std::string& key) {
    return static_cast<std::size_t>(to_u64(take_required(section, key), section, key));
  }

  std::size_t get_size(const std::string& section, const std::string& key,
                       std::size_t fallback) {
    if (!has(section, key)) return fallback;
    return static_cast<std::size_t>(to_u64(take(section, key), section, key));
  }

  std::vector<std::size_t> get_size_list(const std::string& section, const std::string& key,
                                         std::vector<std::size_t> fallback) {
    if (!has(section, key)) return fallback;
    RawValue rv = take(section, key);
    std::vector<std::size_t> out;
    if (io::trim(rv.value).empty()) return out;
    for (const std::string& cell : io::split(rv.value, ',')) {
      RawValue item{io::trim(cell), rv.line};
      out.push_back(static_cast<std::size_t>(to_u64(item, section, key)));
    }
    return out;
  }

  // Every parsed key must have been consumed by a getter.
  void reject_unknown() const {
    for (const auto& [section, kv] : entries_) {
      for (const auto& [key, rv] : kv) {
        if (!consumed_.count(qualify(section, key))) {
          fail(rv.line, "unknown key '" + qualify(section, key) + "'");
        }
      }
    }
  }

 private:
  static std::string qualify(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  RawValue take(const std::string& section, const std::string& key) {
    consumed_.insert(qualify(section, key));
    return entries_.at(section).at(key);
  }

  RawValue take_required(const std::string& section, const std::string& key) {
    if (!has(section, key)) missing(section, key);
    return take(section, key);
  }

  double to_double(const RawValue& rv, const std::string& section, const std::string& key) {
    try {
      return io::parse_double(rv.value, qualify(section, key));
    } catch (const AclError& e) {
      fail(rv.line, e.what());
    }
  }

  std::uint64_t to_u64(const RawValue& rv, const std::string& section,
                       const std::string& key) {
    try {
      long v = io::parse_long(rv.value, qualify(section, key));
      if (v < 0) fail(rv.line, "'" + qualify(section, key) + "' must be >= 0");
      return static_cast<std::uint64_t>(v);
    } catch (const AclError& e) {
      if (e.kind() == Err::ConfigError) throw;
      fail(rv.line, e.what());
    }
  }

  std::string source_;
  std::map<std::string, std::map<std::string, RawValue>> entries_;
  std::set<std::string> consumed_;
};

template <typename T>
T parse_choice(RawConfig& raw, const std::string& section, const std::string& key,
               const std::string& value,
               const std::vector<std::pair<std::string, T>>& choices) {
  for (const auto& [name, v] : choices) {
    if (value == name) return v;
  }
  std::string expected;
  for (const auto& [name, v] : choices) {
    if (!expected.empty()) expected += " | ";
    expected += name;
  }
  raise(Err::ConfigError, raw.source() + ": field '" +
                              (section.empty() ? key : section + "." + key) + "' must be " +
                              expected + ", got '" + value + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (epochs < 1) raise(Err::ConfigError, "epochs must be >= 1");
  if (output_dir.empty()) raise(Err::ConfigError, "output_dir must be non-empty");
  loss.validate();
  if (!(metrics.t > 0.0)) raise(Err::ConfigError, "metrics.t must be > 0");
  if (metrics.probe_every < 1) raise(Err::ConfigError, "metrics.probe_every must be >= 1");
  if (metrics.probe_epochs < 1) raise(Err::ConfigError, "metrics.probe_epochs must be >= 1");
  if (!(metrics.probe_lr > 0.0)) raise(Err::ConfigError, "metrics.probe_lr must be > 0");
  if (encoder.d_h < 1 || encoder.g_hidden < 1 || encoder.d_z < 1) {
    raise(Err::ConfigError, "encoder dims must be >= 1");
  }
  for (std::size_t h : encoder.hidden) {
    if (h < 1) raise(Err::ConfigError, "encoder.hidden entries must be >= 1");
  }
  if (!(encoder.bn_momentum >= 0.0 && encoder.bn_momentum < 1.0)) {
    raise(Err::ConfigError, "encoder.bn_momentum must be in [0, 1)");
  }
  if (!(optimizer.lr >= 0.0)) raise(Err::ConfigError, "optimizer.lr must be >= 0");
  if (optimizer.batch < 1) raise(Err::ConfigError, "optimizer.batch must be >= 1");
  if (dataset.kind == DatasetKind::Synthetic) {
    dataset.synth.validate();
    if (dataset.n_test_per_class < 1) {
      raise(Err::ConfigError, "dataset.n_test_per_class must be >= 1");
    }
  } else {
    if (dataset.audio.root.empty()) raise(Err::ConfigError, "dataset.root must be non-empty");
    if (dataset.audio.n_mels < 1 || dataset.audio.frame_len < 2 || dataset.audio.hop < 1 ||
        dataset.audio.target_frames < 1) {
      raise(Err::ConfigError, "dataset audio shape fields must be positive");
    }
    if (!(dataset.audio.test_fraction > 0.0 && dataset.audio.test_fraction < 1.0)) {
      raise(Err::ConfigError, "dataset.test_fraction must be in (0, 1)");
    }
    dataset.audio.aug.validate();
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source_name) {
  RawConfig raw(text, source_name);
  ExperimentConfig cfg;

  cfg.mode = parse_choice<Mode>(raw, "", "mode", raw.require_string("", "mode"),
                                {{"ssl", Mode::Ssl}, {"supervised", Mode::Supervised}});
  cfg.seed = raw.require_u64("", "seed");
  cfg.epochs = raw.require_size("", "epochs");
  cfg.output_dir = raw.require_string("", "output_dir");

  cfg.loss.alpha = raw.require_double("loss", "alpha");
  cfg.loss.tau = raw.require_double("loss", "tau");
  cfg.loss.margin = raw.get_double("loss", "margin", num::kPi / 2.0);

  cfg.metrics.t = raw.get_double("metrics", "t", 2.0);
  cfg.metrics.probe_every = raw.get_size("metrics", "probe_every", 10);
  cfg.metrics.probe_epochs = raw.get_size("metrics", "probe_epochs", 200);
  cfg.metrics.probe_lr = raw.get_double("metrics", "probe_lr", 0.5);
  cfg.metrics.tolerance_norm = parse_choice<metrics::ToleranceNorm>(
      raw, "metrics", "tolerance_norm",
      raw.get_string("metrics", "tolerance_norm", "all_pairs"),
      {{"all_pairs", metrics::ToleranceNorm::AllPairs},
       {"same_class_only", metrics::ToleranceNorm::SameClassOnly}});

  cfg.encoder.hidden = raw.get_size_list("encoder", "hidden", {64});
  cfg.encoder.d_h = raw.get_size("encoder", "d_h", 32);
  cfg.encoder.g_hidden = raw.get_size("encoder", "g_hidden", 32);
  cfg.encoder.d_z = raw.get_size("encoder", "d_z", 16);
  cfg.encoder.bn_momentum = raw.get_double("encoder", "bn_momentum", 0.9);

  cfg.optimizer.kind = parse_choice<OptKind>(raw, "optimizer", "kind",
                                             raw.get_string("optimizer", "kind", "adam"),
                                             {{"adam", OptKind::Adam}, {"sgd", OptKind::Sgd}});
  cfg.optimizer.lr = raw.get_double("optimizer", "lr", 1e-3);
  cfg.optimizer.batch = raw.get_size("optimizer", "batch", 64);

  cfg.dataset.kind = parse_choice<DatasetKind>(
      raw, "dataset", "kind", raw.require_string("dataset", "kind"),
      {{"synthetic", DatasetKind::Synthetic}, {"audio", DatasetKind::Audio}});
  if (cfg.dataset.kind == DatasetKind::Synthetic) {
    auto& s = cfg.dataset.synth;
    s.n_classes = raw.require_size("dataset", "n_classes");
    s.n_per_class = raw.require_size("dataset", "n_per_class");
    s.dim = raw.require_size("dataset", "dim");
    s.cluster_spread = raw.get_double("dataset", "cluster_spread", 0.15);
    s.noise_aug = raw.get_double("dataset", "noise_sigma", 0.1);
    s.mask_prob = raw.get_double("dataset", "mask_prob", 0.1);
    s.seed = cfg.seed;
    cfg.dataset.n_test_per_class = raw.get_size("dataset", "n_test_per_class", 50);
    cfg.dataset.vec_aug.noise_sigma = s.noise_aug;
    cfg.dataset.vec_aug.mask_prob = s.mask_prob;
    cfg.dataset.vec_aug.scale_lo = raw.get_double("dataset", "scale_lo", 0.7);
    cfg.dataset.vec_aug.scale_hi = raw.get_double("dataset", "scale_hi", 1.3);
  } else {
    auto& a = cfg.dataset.audio;
    a.root = raw.require_string("dataset", "root");
    a.n_mels = raw.get_size("dataset", "n_mels", 40);
    a.frame_len = raw.get_size("dataset", "frame_len", 256);
    a.hop = raw.get_size("dataset", "hop", 128);
    a.target_frames = raw.get_size("dataset", "target_frames", 32);
    a.test_fraction = raw.get_double("dataset", "test_fraction", 0.2);
    a.aug.mixback_lambda_max = raw.get_double("dataset", "mixback_lambda_max", 0.5);
    a.aug.crop_scale_lo = raw.get_double("dataset", "crop_scale_lo", 0.6);
    a.aug.crop_scale_hi = raw.get_double("dataset", "crop_scale_hi", 1.0);
    a.aug.freq_mask_max = raw.get_size("dataset", "freq_mask_max", 12);
    a.aug.time_mask_max = raw.get_size("dataset", "time_mask_max", 12);
    a.aug.blur_sigma_lo = raw.get_double("dataset", "blur_sigma_lo", 0.0);
    a.aug.blur_sigma_hi = raw.get_double("dataset", "blur_sigma_hi", 1.0);
    a.aug.seed = cfg.seed;
  }

  raw.reject_unknown();
  try {
    cfg.validate();
  } catch (const AclError& e) {
    raise(Err::ConfigError, source_name + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path), path.filename().string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  auto put = [&](const std::string& key, const std::string& value) {
    out += key + " = " + value + "\n";
  };
  auto put_d = [&](const std::string& key, double v) { put(key, io::fmt_double(v)); };
  auto put_n = [&](const std::string& key, std::size_t v) { put(key, std::to_string(v)); };

  put("mode", cfg.mode == Mode::Ssl ? "ssl" : "supervised");
  put("seed", std::to_string(cfg.seed));
  put_n("epochs", cfg.epochs);
  put("output_dir", cfg.output_dir);

  out += "\n[loss]\n";
  put_d("alpha", cfg.loss.alpha);
  put_d("tau", cfg.loss.tau);
  put_d("margin", cfg.loss.margin);

  out += "\n[metrics]\n";
  put_d("t", cfg.metrics.t);
  put_n("probe_every", cfg.metrics.probe_every);
  put_n("probe_epochs", cfg.metrics.probe_epochs);
  put_d("probe_lr", cfg.metrics.probe_lr);
  put("tolerance_norm",
      cfg.metrics.tolerance_norm == metrics::ToleranceNorm::AllPairs ? "all_pairs"
                                                                     : "same_class_only");

  out += "\n[encoder]\n";
  std::string hidden;
  for (std::size_t h : cfg.encoder.hidden) {
    if (!hidden.empty()) hidden += ",";
    hidden += std::to_string(h);
  }
  put("hidden", hidden);
  put_n("d_h", cfg.encoder.d_h);
  put_n("g_hidden", cfg.encoder.g_hidden);
  put_n("d_z", cfg.encoder.d_z);
  put_d("bn_momentum", cfg.encoder.bn_momentum);

  out += "\n[optimizer]\n";
  put("kind", cfg.optimizer.kind == OptKind::Adam ? "adam" : "sgd");
  put_d("lr", cfg.optimizer.lr);
  put_n("batch", cfg.optimizer.batch);

  out += "\n[dataset]\n";
  if (cfg.dataset.kind == DatasetKind::Synthetic) {
    put("kind", "synthetic");
    put_n("n_classes", cfg.dataset.synth.n_classes);
    put_n("n_per_class", cfg.dataset.synth.n_per_class);
    put_n("n_test_per_class", cfg.dataset.n_test_per_class);
    put_n("dim", cfg.dataset.synth.dim);
    put_d("cluster_spread", cfg.dataset.synth.cluster_spread);
    put_d("noise_sigma", cfg.dataset.synth.noise_aug);
    put_d("mask_prob", cfg.dataset.synth.mask_prob);
    put_d("scale_lo", cfg.dataset.vec_aug.scale_lo);
    put_d("scale_hi", cfg.dataset.vec_aug.scale_hi);
  } else {
    put("kind", "audio");
    put("root", cfg.dataset.audio.root);
    put_n("n_mels", cfg.dataset.audio.n_mels);
    put_n("frame_len", cfg.dataset.audio.frame_len);
    put_n("hop", cfg.dataset.audio.hop);
    put_n("target_frames", cfg.dataset.audio.target_frames);
    put_d("test_fraction", cfg.dataset.audio.test_fraction);
    put_d("mixback_lambda_max", cfg.dataset.audio.aug.mixback_lambda_max);
    put_d("crop_scale_lo", cfg.dataset.audio.aug.crop_scale_lo);
    put_d("crop_scale_hi", cfg.dataset.audio.aug.crop_scale_hi);
    put_n("freq_mask_max", cfg.dataset.audio.aug.freq_mask_max);
    put_n("time_mask_max", cfg.dataset.audio.aug.time_mask_max);
    put_d("blur_sigma_lo", cfg.dataset.audio.aug.blur_sigma_lo);
    put_d("blur_sigma_hi", cfg.dataset.audio.aug.blur_sigma_hi);
  }
  return out;
}

}  // namespace config
}  // namespace acl
