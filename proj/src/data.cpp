#include "acl/data.hpp"

#include <algorithm>
#include <cmath>

#include "acl/io.hpp"

namespace acl {
namespace data {

namespace {

constexpr double kLogEps = 1e-10;
constexpr int kResampleTries = 8;

// Substream tags; the derivation chain for every consumer is documented in
// README.md and frozen for reproducibility.
constexpr std::uint64_t kTagCentroid = 1;
constexpr std::uint64_t kTagSample = 2;

std::size_t reflect_index(long i, std::size_t n) {
  long m = static_cast<long>(n);
  while (i < 0 || i >= m) {
    if (i < 0) i = -i - 1;
    if (i >= m) i = 2 * m - 1 - i;
  }
  return static_cast<std::size_t>(i);
}

}  // namespace

void SyntheticDatasetSpec::validate() const {
  if (n_classes < 1) raise(Err::ConfigError, "dataset.n_classes must be >= 1");
  if (n_per_class < 1) raise(Err::ConfigError, "dataset.n_per_class must be >= 1");
  if (dim < 1) raise(Err::ConfigError, "dataset.dim must be >= 1");
  if (!(cluster_spread > 0.0)) raise(Err::ConfigError, "dataset.cluster_spread must be > 0");
  if (!(noise_aug > 0.0)) raise(Err::ConfigError, "dataset.noise_aug must be > 0");
  if (mask_prob < 0.0 || mask_prob > 1.0) {
    raise(Err::ConfigError, "dataset.mask_prob must be in [0, 1]");
  }
}

void AugmentationConfig::validate() const {
  if (mixback_lambda_max < 0.0 || mixback_lambda_max >= 1.0) {
    raise(Err::ConfigError, "augment.mixback_lambda_max must be in [0, 1)");
  }
  if (!(crop_scale_lo > 0.0) || crop_scale_lo > crop_scale_hi || crop_scale_hi > 1.0) {
    raise(Err::ConfigError, "augment.crop_scale range must satisfy 0 < lo <= hi <= 1");
  }
  if (blur_sigma_lo < 0.0 || blur_sigma_lo > blur_sigma_hi) {
    raise(Err::ConfigError, "augment.blur_sigma range must satisfy 0 <= lo <= hi");
  }
}

Dataset generate_synthetic(const SyntheticDatasetSpec& spec, std::uint64_t stream) {
  spec.validate();
  Rng master(spec.seed);

  // Centroids are shared by every stream drawn from the same seed.
  Matrix centroids(spec.n_classes, spec.dim);
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    Rng crng = master.split(kTagCentroid).split(k);
    while (true) {
      Vector v(spec.dim);
      for (double& x : v) x = crng.next_gaussian();
      if (num::l2_norm(v) >= num::kZeroNormEps) {
        Vector u = num::l2_normalize(v);
        std::copy(u.begin(), u.end(), centroids.row(k).begin());
        break;
      }
    }
  }

  const std::size_t n = spec.n_classes * spec.n_per_class;
  Dataset ds;
  ds.x = Matrix(n, spec.dim);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t label = i / spec.n_per_class;
    ds.labels[i] = static_cast<int>(label);
    Rng irng = master.split(kTagSample).split(stream).split(i);
    auto row = ds.x.row(i);
    auto c = centroids.row(label);
    for (std::size_t t = 0; t < spec.dim; ++t) {
      row[t] = c[t] + spec.cluster_spread * irng.next_gaussian();
    }
  }
  return ds;
}

Vector augment_vector(const Vector& x, const VectorAugmentConfig& cfg, Rng& rng) {
  if (cfg.noise_sigma < 0.0) raise(Err::ConfigError, "augment noise sigma must be >= 0");
  if (!(cfg.scale_lo > 0.0) || cfg.scale_lo > cfg.scale_hi) {
    raise(Err::ConfigError, "augment scale range must satisfy 0 < lo <= hi");
  }
  if (cfg.mask_prob < 0.0 || cfg.mask_prob > 1.0) {
    raise(Err::ConfigError, "augment mask_prob must be in [0, 1]");
  }
  for (int attempt = 0; attempt < kResampleTries; ++attempt) {
    Vector out(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
      out[t] = x[t] + cfg.noise_sigma * rng.next_gaussian();
    }
    double scale = rng.next_range(cfg.scale_lo, cfg.scale_hi);
    for (double& v : out) v *= scale;
    for (double& v : out) {
      if (rng.next_unit() < cfg.mask_prob) v = 0.0;
    }
    if (num::l2_norm(out) >= num::kZeroNormEps) return out;
  }
  return x;  // degenerate after all tries: pass through unaugmented
}

TFPatch log_mel(const std::vector<double>& wav, int sample_rate, std::size_t n_mels,
                std::size_t frame_len, std::size_t hop) {
  if (wav.empty()) raise(Err::EmptyInput, "log_mel: empty signal");
  if (sample_rate <= 0 || n_mels < 1 || frame_len < 2 || hop < 1) {
    raise(Err::ConfigError, "log_mel: parameters must be positive");
  }
  if (wav.size() < frame_len) {
    raise(Err::TooShort, "log_mel: signal shorter than one frame");
  }
  const std::size_t frames = 1 + (wav.size() - frame_len) / hop;
  const std::size_t bins = frame_len / 2 + 1;

  Vector window(frame_len);
  for (std::size_t t = 0; t < frame_len; ++t) {
    window[t] = 0.5 * (1.0 - std::cos(2.0 * num::kPi * static_cast<double>(t) /
                                      static_cast<double>(frame_len - 1)));
  }

  // Real DFT twiddle tables; frame_len is small at desk scale so the O(n^2)
  // transform with precomputed tables is fast enough.
  std::vector<double> cos_tab(bins * frame_len), sin_tab(bins * frame_len);
  for (std::size_t k = 0; k < bins; ++k) {
    for (std::size_t t = 0; t < frame_len; ++t) {
      double a = 2.0 * num::kPi * static_cast<double>(k) * static_cast<double>(t) /
                 static_cast<double>(frame_len);
      cos_tab[k * frame_len + t] = std::cos(a);
      sin_tab[k * frame_len + t] = std::sin(a);
    }
  }

  // HTK mel: mel(f) = 2595 log10(1 + f / 700).
  auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  double mel_hi = hz_to_mel(static_cast<double>(sample_rate) / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t m = 0; m < edges.size(); ++m) {
    edges[m] = mel_to_hz(mel_hi * static_cast<double>(m) /
                         static_cast<double>(n_mels + 1));
  }
  Matrix bank(n_mels, bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * static_cast<double>(sample_rate) /
                 static_cast<double>(frame_len);
      double w = 0.0;
      if (f >= lo && f <= mid && mid > lo) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f <= hi && hi > mid) {
        w = (hi - f) / (hi - mid);
      }
      bank.at(m, k) = w;
    }
  }

  TFPatch patch;
  patch.grid = Matrix(n_mels, frames);
  Vector windowed(frame_len), mags(bins);
  for (std::size_t fr = 0; fr < frames; ++fr) {
    const double* seg = wav.data() + fr * hop;
    for (std::size_t t = 0; t < frame_len; ++t) windowed[t] = seg[t] * window[t];
    for (std::size_t k = 0; k < bins; ++k) {
      const double* ct = cos_tab.data() + k * frame_len;
      const double* st = sin_tab.data() + k * frame_len;
      double re = 0.0, im = 0.0;
      for (std::size_t t = 0; t < frame_len; ++t) {
        re += windowed[t] * ct[t];
        im -= windowed[t] * st[t];
      }
      mags[k] = std::sqrt(re * re + im * im);
    }
    for (std::size_t m = 0; m < n_mels; ++m) {
      double energy = num::dot(bank.row(m), mags);
      patch.grid.at(m, fr) = std::log(energy + kLogEps);
    }
  }
  return patch;
}

std::pair<TFPatch, TFPatch> crop_pair(const TFPatch& patch, std::size_t target_frames,
                                      Rng& rng) {
  if (target_frames < 1) raise(Err::ConfigError, "crop_pair: target_frames must be >= 1");
  if (patch.frames() < target_frames) {
    raise(Err::TooShort, "crop_pair: patch has " + std::to_string(patch.frames()) +
                             " frames, need " + std::to_string(target_frames));
  }
  auto crop_at = [&](std::size_t off) {
    TFPatch out;
    out.source_id = patch.source_id;
    out.grid = Matrix(patch.bands(), target_frames);
    for (std::size_t m = 0; m < patch.bands(); ++m) {
      for (std::size_t t = 0; t < target_frames; ++t) {
        out.grid.at(m, t) = patch.grid.at(m, off + t);
      }
    }
    return out;
  };
  std::size_t span = patch.frames() - target_frames + 1;
  std::size_t o1 = static_cast<std::size_t>(rng.next_below(span));
  std::size_t o2 = static_cast<std::size_t>(rng.next_below(span));
  return {crop_at(o1), crop_at(o2)};
}

TFPatch mix_back(const TFPatch& x, const TFPatch& background, double lambda_max, Rng& rng) {
  if (!x.grid.same_shape(background.grid)) {
    raise(Err::ShapeMismatch, "mix_back: patch shapes differ");
  }
  if (lambda_max < 0.0 || lambda_max >= 1.0) {
    raise(Err::ConfigError, "mix_back: lambda_max must be in [0, 1)");
  }
  double lambda = rng.next_unit() * lambda_max;
  TFPatch out;
  out.source_id = x.source_id;
  out.grid = Matrix(x.grid.rows, x.grid.cols);
  for (std::size_t i = 0; i < out.grid.data.size(); ++i) {
    double fg = std::exp(x.grid.data[i]);
    double bg = std::exp(background.grid.data[i]);
    out.grid.data[i] = std::log((1.0 - lambda) * fg + lambda * bg);
  }
  return out;
}

TFPatch spec_masks(const TFPatch& patch, const AugmentationConfig& cfg, Rng& rng) {
  TFPatch out = patch;
  std::size_t fmax = std::min(cfg.freq_mask_max, patch.bands());
  std::size_t fw = static_cast<std::size_t>(rng.next_below(fmax + 1));
  std::size_t f0 = static_cast<std::size_t>(rng.next_below(patch.bands() - fw + 1));
  for (std::size_t m = f0; m < f0 + fw; ++m) {
    for (std::size_t t = 0; t < patch.frames(); ++t) out.grid.at(m, t) = 0.0;
  }
  std::size_t tmax = std::min(cfg.time_mask_max, patch.frames());
  std::size_t tw = static_cast<std::size_t>(rng.next_below(tmax + 1));
  std::size_t t0 = static_cast<std::size_t>(rng.next_below(patch.frames() - tw + 1));
  for (std::size_t m = 0; m < patch.bands(); ++m) {
    for (std::size_t t = t0; t < t0 + tw; ++t) out.grid.at(m, t) = 0.0;
  }
  return out;
}

namespace {

// Bilinear sample with corner-aligned mapping; exact when sizes match.
double bilinear(const Matrix& g, std::size_t r0, std::size_t c0, std::size_t ch,
                std::size_t cw, double sr, double sc) {
  std::size_t ri = static_cast<std::size_t>(sr);
  std::size_t ci = static_cast<std::size_t>(sc);
  double frr = sr - static_cast<double>(ri);
  double frc = sc - static_cast<double>(ci);
  std::size_t ri1 = std::min(ri + 1, ch - 1);
  std::size_t ci1 = std::min(ci + 1, cw - 1);
  double v00 = g.at(r0 + ri, c0 + ci);
  double v01 = g.at(r0 + ri, c0 + ci1);
  double v10 = g.at(r0 + ri1, c0 + ci);
  double v11 = g.at(r0 + ri1, c0 + ci1);
  return (1.0 - frr) * ((1.0 - frc) * v00 + frc * v01) +
         frr * ((1.0 - frc) * v10 + frc * v11);
}

}  // namespace

TFPatch random_resized_crop(const TFPatch& patch, const AugmentationConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t rows = patch.bands();
  const std::size_t cols = patch.frames();
  for (int attempt = 0; attempt < kResampleTries; ++attempt) {
    double area = rng.next_range(cfg.crop_scale_lo, cfg.crop_scale_hi);
    double side = std::sqrt(area);
    std::size_t ch = static_cast<std::size_t>(std::llround(side * static_cast<double>(rows)));
    std::size_t cw = static_cast<std::size_t>(std::llround(side * static_cast<double>(cols)));
    if (ch < 1 || cw < 1) continue;  // degenerate crop: redraw
    ch = std::min(ch, rows);
    cw = std::min(cw, cols);
    std::size_t r0 = static_cast<std::size_t>(rng.next_below(rows - ch + 1));
    std::size_t c0 = static_cast<std::size_t>(rng.next_below(cols - cw + 1));

    TFPatch out;
    out.source_id = patch.source_id;
    out.grid = Matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double sr = rows > 1 ? static_cast<double>(r) * static_cast<double>(ch - 1) /
                                 static_cast<double>(rows - 1)
                           : 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        double sc = cols > 1 ? static_cast<double>(c) * static_cast<double>(cw - 1) /
                                   static_cast<double>(cols - 1)
                             : 0.0;
        out.grid.at(r, c) = bilinear(patch.grid, r0, c0, ch, cw, sr, sc);
      }
    }
    return out;
  }
  return patch;  // all draws degenerate: pass through
}

TFPatch gaussian_blur(const TFPatch& patch, const AugmentationConfig& cfg, Rng& rng) {
  cfg.validate();
  double sigma = rng.next_range(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
  if (sigma < 1e-12) return patch;

  long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;

  const std::size_t rows = patch.bands();
  const std::size_t cols = patch.frames();
  Matrix tmp(rows, cols), out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {      // horizontal pass
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        std::size_t cc = reflect_index(static_cast<long>(c) + i, cols);
        acc += kernel[static_cast<std::size_t>(i + radius)] * patch.grid.at(r, cc);
      }
      tmp.at(r, c) = acc;
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {      // vertical pass
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        std::size_t rr = reflect_index(static_cast<long>(r) + i, rows);
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(rr, c);
      }
      out.at(r, c) = acc;
    }
  }
  TFPatch result;
  result.source_id = patch.source_id;
  result.grid = std::move(out);
  return result;
}

void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::string out = "label";
  for (std::size_t j = 0; j < ds.x.cols; ++j) out += ",feature_" + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += std::to_string(ds.labels[i]);
    for (double v : ds.x.row(i)) {
      out += ",";
      out += io::fmt_double(v);
    }
    out += "\n";
  }
  io::write_file(path, out);
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::string content = io::read_file(path);
  std::vector<std::string> lines = io::split(content, '\n');
  while (!lines.empty() && io::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) raise(Err::DataError, path.string() + ": empty dataset file");

  std::vector<std::string> header = io::split(io::trim(lines[0]), ',');
  if (header.size() < 2 || header[0] != "label") {
    raise(Err::DataError, path.string() + ": expected header label,feature_0,...");
  }
  const std::size_t dim = header.size() - 1;
  const std::size_t n = lines.size() - 1;
  Dataset ds;
  ds.x = Matrix(n, dim);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string where = path.string() + ":" + std::to_string(i + 2);
    std::vector<std::string> cells = io::split(io::trim(lines[i + 1]), ',');
    if (cells.size() != dim + 1) {
      raise(Err::DataError, where + ": expected " + std::to_string(dim + 1) + " columns");
    }
    ds.labels[i] = static_cast<int>(io::parse_long(cells[0], where + " label"));
    for (std::size_t j = 0; j < dim; ++j) {
      ds.x.at(i, j) = io::parse_double(cells[j + 1], where + " feature_" + std::to_string(j));
    }
    num::require_finite(ds.x.row(i), "dataset row");
  }
  return ds;
}

}  // namespace data
}  // namespace acl
