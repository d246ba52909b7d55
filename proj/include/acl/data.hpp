#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acl/numerics.hpp"
#include "acl/rng.hpp"

namespace acl {
namespace data {

struct SyntheticDatasetSpec {
  std::size_t n_classes = 4;
  std::size_t n_per_class = 200;
  std::size_t dim = 16;
  double cluster_spread = 0.15;   // sigma_c
  double noise_aug = 0.1;         // sigma_a
  double mask_prob = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Dataset {
  Matrix x;                  // n x dim
  std::vector<int> labels;   // length n

  std::size_t size() const { return x.rows; }
};

// Class centroids drawn uniformly on the unit hypersphere, samples are
// centroid + N(0, sigma_c^2) noise. `stream` separates e.g. train/test sets.
Dataset generate_synthetic(const SyntheticDatasetSpec& spec, std::uint64_t stream = 0);

// Log-magnitude time-frequency patch (mel bands x frames).
struct TFPatch {
  Matrix grid;
  std::string source_id;

  std::size_t bands() const { return grid.rows; }
  std::size_t frames() const { return grid.cols; }
};

struct AugmentationConfig {
  double mixback_lambda_max = 0.5;          // in [0, 1)
  double crop_scale_lo = 0.6, crop_scale_hi = 1.0;
  std::size_t freq_mask_max = 12;           // bands
  std::size_t time_mask_max = 12;           // frames
  double blur_sigma_lo = 0.0, blur_sigma_hi = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct VectorAugmentConfig {
  double noise_sigma = 0.1;     // sigma_a
  double scale_lo = 0.7, scale_hi = 1.3;
  double mask_prob = 0.1;
};

// Gaussian noise, random positive scaling, per-coordinate masking. A fully
// masked (zero) result is re-drawn up to 8 times, then returned unaugmented.
Vector augment_vector(const Vector& x, const VectorAugmentConfig& cfg, Rng& rng);

// Hann-windowed DFT magnitudes through an HTK-style triangular mel bank,
// then log(x + 1e-10). Frames: 1 + floor((len - frame_len) / hop).
TFPatch log_mel(const std::vector<double>& wav, int sample_rate, std::size_t n_mels,
                std::size_t frame_len, std::size_t hop);

// Two independent uniformly-positioned crops of target width, full height.
std::pair<TFPatch, TFPatch> crop_pair(const TFPatch& patch, std::size_t target_frames,
                                      Rng& rng);

// Convex mix in the linear-magnitude domain with lambda ~ U(0, lambda_max).
TFPatch mix_back(const TFPatch& x, const TFPatch& background, double lambda_max, Rng& rng);

// One contiguous frequency mask and one time mask, widths uniform in
// {0, ..., max}.
TFPatch spec_masks(const TFPatch& patch, const AugmentationConfig& cfg, Rng& rng);

// Crop to an area fraction in crop_scale_range, bilinearly resize back.
// Degenerate (empty) crops are re-drawn up to 8 times, then pass through.
TFPatch random_resized_crop(const TFPatch& patch, const AugmentationConfig& cfg, Rng& rng);

// Truncated (+/- 3 sigma) normalized Gaussian kernel, reflect padding,
// sigma ~ U(blur_sigma_range).
TFPatch gaussian_blur(const TFPatch& patch, const AugmentationConfig& cfg, Rng& rng);

// RIFF/WAVE PCM16 mono or stereo (stereo averaged to mono); samples in
// [-1, 1]. Anything else is Err::DataError.
struct WavClip {
  std::vector<double> samples;
  int sample_rate = 0;
};

WavClip read_wav(const std::filesystem::path& path);
void write_wav_pcm16(const std::filesystem::path& path, const std::vector<double>& samples,
                     int sample_rate);

// Directory-per-class corpus: root/<class_name>/*.wav, classes ordered by
// name. Returns clips with labels.
struct AudioCorpus {
  std::vector<WavClip> clips;
  std::vector<int> labels;
  std::vector<std::string> class_names;
};

AudioCorpus load_audio_corpus(const std::filesystem::path& root);

// CSV round-trip: header `label,feature_0..feature_{d-1}`.
void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path);

}  // namespace data
}  // namespace acl
