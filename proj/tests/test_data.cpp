#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "acl/data.hpp"
#include "acl/numerics.hpp"
#include "acl/rng.hpp"
#include "oracles.hpp"

using namespace acl;
namespace fs = std::filesystem;

namespace {

data::TFPatch make_patch(std::size_t bands, std::size_t frames, double fill,
                         const std::string& id = "p") {
  data::TFPatch p;
  p.grid = Matrix(bands, frames);
  for (double& v : p.grid.data) v = fill;
  p.source_id = id;
  return p;
}

data::TFPatch random_patch(Rng& rng, std::size_t bands, std::size_t frames) {
  data::TFPatch p;
  p.grid = oracles::random_matrix(rng, bands, frames, -2.0, 2.0);
  p.source_id = "rnd";
  return p;
}

std::vector<double> sine(double hz, int rate, std::size_t len) {
  std::vector<double> s(len);
  for (std::size_t t = 0; t < len; ++t) {
    s[t] = 0.5 * std::sin(2.0 * num::kPi * hz * static_cast<double>(t) / rate);
  }
  return s;
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::string wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                      std::uint16_t bits, const std::vector<std::int16_t>& interleaved,
                      bool junk_chunk = false) {
  std::string payload;
  for (std::int16_t v : interleaved) put_u16(payload, static_cast<std::uint16_t>(v));

  std::string fmt;
  put_u16(fmt, format);
  put_u16(fmt, channels);
  put_u32(fmt, rate);
  put_u32(fmt, rate * channels * bits / 8);
  put_u16(fmt, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(fmt, bits);

  std::string body = "WAVE";
  if (junk_chunk) {
    body += "LIST";
    put_u32(body, 3);   // odd size: reader must skip the pad byte
    body += "abc";
    body.push_back('\0');
  }
  body += "fmt ";
  put_u32(body, static_cast<std::uint32_t>(fmt.size()));
  body += fmt;
  body += "data";
  put_u32(body, static_cast<std::uint32_t>(payload.size()));
  body += payload;

  std::string out = "RIFF";
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  out += body;
  return out;
}

fs::path write_temp(const std::string& name, const std::string& bytes) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  return p;
}

}  // namespace

TEST_CASE("synthetic dataset structure and determinism") {
  data::SyntheticDatasetSpec spec;
  spec.n_classes = 3;
  spec.n_per_class = 10;
  spec.dim = 8;
  spec.cluster_spread = 0.05;
  spec.seed = 21;

  auto ds = data::generate_synthetic(spec);
  REQUIRE(ds.size() == 30);
  CHECK(ds.x.cols == 8);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.labels[i] == static_cast<int>(i / 10));
  }

  auto again = data::generate_synthetic(spec);
  CHECK(ds.x.data == again.x.data);

  auto test_stream = data::generate_synthetic(spec, 1);
  CHECK(ds.x.data != test_stream.x.data);
  CHECK(ds.labels == test_stream.labels);

  // In the zero-noise limit every class collapses onto its unit centroid,
  // and the centroids are shared across streams.
  spec.cluster_spread = 1e-12;
  auto tight = data::generate_synthetic(spec);
  auto tight_test = data::generate_synthetic(spec, 1);
  for (std::size_t k = 0; k < 3; ++k) {
    auto first = tight.x.row(k * 10);
    CHECK(std::abs(num::l2_norm(Vector(first.begin(), first.end())) - 1.0) < 1e-9);
    for (std::size_t i = 0; i < 10; ++i) {
      auto row = tight.x.row(k * 10 + i);
      auto other = tight_test.x.row(k * 10 + i);
      for (std::size_t t = 0; t < 8; ++t) {
        CHECK(std::abs(row[t] - first[t]) < 1e-9);
        CHECK(std::abs(other[t] - first[t]) < 1e-9);
      }
    }
  }

  data::SyntheticDatasetSpec bad = spec;
  bad.n_classes = 0;
  CHECK_THROWS_AS(data::generate_synthetic(bad), AclError);
  bad = spec;
  bad.cluster_spread = 0.0;
  CHECK_THROWS_AS(data::generate_synthetic(bad), AclError);
  bad.cluster_spread = -0.1;
  CHECK_THROWS_AS(data::generate_synthetic(bad), AclError);
}

TEST_CASE("vector augmentation") {
  Vector x{0.3, -0.8, 1.2, 0.0, 0.5};

  data::VectorAugmentConfig ident;
  ident.noise_sigma = 0.0;
  ident.scale_lo = 1.0;
  ident.scale_hi = 1.0;
  ident.mask_prob = 0.0;
  Rng rng(31);
  CHECK(data::augment_vector(x, ident, rng) == x);

  // Full masking is degenerate on every attempt and falls back to the input.
  data::VectorAugmentConfig all_mask = ident;
  all_mask.mask_prob = 1.0;
  CHECK(data::augment_vector(x, all_mask, rng) == x);

  // Pure scaling preserves coordinate ratios.
  data::VectorAugmentConfig scale_only = ident;
  scale_only.scale_lo = 0.5;
  scale_only.scale_hi = 2.0;
  Vector scaled = data::augment_vector(x, scale_only, rng);
  double s = scaled[0] / x[0];
  CHECK(s >= 0.5);
  CHECK(s <= 2.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    CHECK(std::abs(scaled[t] - s * x[t]) < 1e-12);
  }

  // Same stream, same draw.
  data::VectorAugmentConfig noisy;
  Rng a(7), b(7);
  CHECK(data::augment_vector(x, noisy, a) == data::augment_vector(x, noisy, b));
  CHECK(data::augment_vector(x, noisy, a) != x);

  data::VectorAugmentConfig bad;
  bad.noise_sigma = -1.0;
  CHECK_THROWS_AS(data::augment_vector(x, bad, rng), AclError);
  bad = ident;
  bad.scale_lo = 0.0;
  CHECK_THROWS_AS(data::augment_vector(x, bad, rng), AclError);
  bad = ident;
  bad.mask_prob = 1.5;
  CHECK_THROWS_AS(data::augment_vector(x, bad, rng), AclError);
}

TEST_CASE("log mel spectrogram") {
  const int rate = 16000;

  // Frame accounting: 1 + floor((len - frame_len) / hop).
  auto quiet = std::vector<double>(256 + 128 * 3, 0.0);
  auto patch = data::log_mel(quiet, rate, 12, 256, 128);
  CHECK(patch.bands() == 12);
  CHECK(patch.frames() == 4);

  // Silence hits the log floor exactly.
  for (double v : patch.grid.data) CHECK(v == std::log(1e-10));

  // A higher tone peaks in a higher mel band.
  auto low = data::log_mel(sine(500.0, rate, 2048), rate, 24, 256, 128);
  auto high = data::log_mel(sine(3000.0, rate, 2048), rate, 24, 256, 128);
  auto peak_band = [](const data::TFPatch& p) {
    std::size_t best = 0;
    double best_e = -1e300;
    for (std::size_t m = 0; m < p.bands(); ++m) {
      double e = 0.0;
      for (std::size_t f = 0; f < p.frames(); ++f) e += p.grid.at(m, f);
      if (e > best_e) {
        best_e = e;
        best = m;
      }
    }
    return best;
  };
  CHECK(peak_band(low) < peak_band(high));

  CHECK_THROWS_AS(data::log_mel({}, rate, 12, 256, 128), AclError);
  CHECK_THROWS_AS(data::log_mel(quiet, 0, 12, 256, 128), AclError);
  CHECK_THROWS_AS(data::log_mel(std::vector<double>(100, 0.1), rate, 12, 256, 128),
                  AclError);
}

TEST_CASE("crop pair") {
  Rng rng(41);
  auto p = random_patch(rng, 6, 20);
  p.source_id = "clip-3";

  auto [a, b] = data::crop_pair(p, 8, rng);
  CHECK(a.source_id == "clip-3");
  CHECK(b.source_id == "clip-3");
  CHECK(a.bands() == 6);
  CHECK(a.frames() == 8);
  CHECK(b.frames() == 8);

  // Each crop is a contiguous frame slice of the source.
  auto is_slice = [&](const data::TFPatch& c) {
    for (std::size_t off = 0; off + c.frames() <= p.frames(); ++off) {
      bool match = true;
      for (std::size_t m = 0; m < c.bands() && match; ++m) {
        for (std::size_t f = 0; f < c.frames() && match; ++f) {
          if (c.grid.at(m, f) != p.grid.at(m, off + f)) match = false;
        }
      }
      if (match) return true;
    }
    return false;
  };
  CHECK(is_slice(a));
  CHECK(is_slice(b));

  // Exact-width source admits only the zero offset.
  auto [c, d] = data::crop_pair(p, 20, rng);
  CHECK(c.grid.data == p.grid.data);
  CHECK(d.grid.data == p.grid.data);

  CHECK_THROWS_AS(data::crop_pair(p, 21, rng), AclError);
}

TEST_CASE("background mixing") {
  Rng rng(42);
  auto x = make_patch(4, 6, std::log(4.0), "x");
  auto bg = make_patch(4, 6, std::log(8.0), "bg");

  // lambda_max = 0 keeps the foreground.
  auto same = data::mix_back(x, bg, 0.0, rng);
  for (double v : same.grid.data) CHECK(std::abs(v - std::log(4.0)) < 1e-12);
  CHECK(same.source_id == "x");

  // Clone the stream to predict lambda, then verify the linear-domain mix.
  Rng clone = rng;
  double lambda = clone.next_unit() * 0.5;
  auto mixed = data::mix_back(x, bg, 0.5, rng);
  double want = std::log((1.0 - lambda) * 4.0 + lambda * 8.0);
  for (double v : mixed.grid.data) CHECK(std::abs(v - want) < 1e-12);

  auto small = make_patch(4, 5, 0.0);
  CHECK_THROWS_AS(data::mix_back(x, small, 0.5, rng), AclError);
  CHECK_THROWS_AS(data::mix_back(x, bg, 1.0, rng), AclError);
  CHECK_THROWS_AS(data::mix_back(x, bg, -0.1, rng), AclError);
}

TEST_CASE("spectrogram masks") {
  Rng rng(43);
  auto p = make_patch(8, 10, 1.0);

  data::AugmentationConfig cfg;
  cfg.freq_mask_max = 0;
  cfg.time_mask_max = 0;
  auto untouched = data::spec_masks(p, cfg, rng);
  CHECK(untouched.grid.data == p.grid.data);

  cfg.freq_mask_max = 3;
  cfg.time_mask_max = 4;
  for (int trial = 0; trial < 20; ++trial) {
    auto masked = data::spec_masks(p, cfg, rng);
    std::vector<std::size_t> zero_rows, zero_cols;
    for (std::size_t m = 0; m < 8; ++m) {
      bool all = true;
      for (std::size_t f = 0; f < 10; ++f) all = all && masked.grid.at(m, f) == 0.0;
      if (all) zero_rows.push_back(m);
    }
    for (std::size_t f = 0; f < 10; ++f) {
      bool all = true;
      for (std::size_t m = 0; m < 8; ++m) all = all && masked.grid.at(m, f) == 0.0;
      if (all) zero_cols.push_back(f);
    }
    CHECK(zero_rows.size() <= 3);
    CHECK(zero_cols.size() <= 4);
    for (std::size_t i = 1; i < zero_rows.size(); ++i) {
      CHECK(zero_rows[i] == zero_rows[i - 1] + 1);
    }
    for (std::size_t i = 1; i < zero_cols.size(); ++i) {
      CHECK(zero_cols[i] == zero_cols[i - 1] + 1);
    }
    // Nothing outside the two masks changes.
    for (std::size_t m = 0; m < 8; ++m) {
      for (std::size_t f = 0; f < 10; ++f) {
        bool in_row = std::find(zero_rows.begin(), zero_rows.end(), m) != zero_rows.end();
        bool in_col = std::find(zero_cols.begin(), zero_cols.end(), f) != zero_cols.end();
        if (in_row || in_col) {
          CHECK(masked.grid.at(m, f) == 0.0);
        } else {
          CHECK(masked.grid.at(m, f) == 1.0);
        }
      }
    }
  }
}

TEST_CASE("random resized crop") {
  Rng rng(44);
  auto p = random_patch(rng, 8, 12);

  data::AugmentationConfig unit;
  unit.crop_scale_lo = 1.0;
  unit.crop_scale_hi = 1.0;
  auto same = data::random_resized_crop(p, unit, rng);
  CHECK(same.grid.data == p.grid.data);

  data::AugmentationConfig cfg;
  cfg.crop_scale_lo = 0.4;
  cfg.crop_scale_hi = 0.9;
  double vmin = *std::min_element(p.grid.data.begin(), p.grid.data.end());
  double vmax = *std::max_element(p.grid.data.begin(), p.grid.data.end());
  for (int trial = 0; trial < 20; ++trial) {
    auto out = data::random_resized_crop(p, cfg, rng);
    CHECK(out.bands() == p.bands());
    CHECK(out.frames() == p.frames());
    for (double v : out.grid.data) {
      CHECK(v >= vmin - 1e-12);
      CHECK(v <= vmax + 1e-12);
    }
  }
}

TEST_CASE("gaussian blur") {
  Rng rng(45);
  auto p = random_patch(rng, 8, 12);

  data::AugmentationConfig off;
  off.blur_sigma_lo = 0.0;
  off.blur_sigma_hi = 0.0;
  auto same = data::gaussian_blur(p, off, rng);
  CHECK(same.grid.data == p.grid.data);

  data::AugmentationConfig strong;
  strong.blur_sigma_lo = 1.5;
  strong.blur_sigma_hi = 1.5;
  auto flat = make_patch(6, 9, 2.5);
  auto blurred_flat = data::gaussian_blur(flat, strong, rng);
  for (double v : blurred_flat.grid.data) CHECK(std::abs(v - 2.5) < 1e-12);

  auto variance = [](const Matrix& m) {
    double mean = 0.0;
    for (double v : m.data) mean += v;
    mean /= static_cast<double>(m.data.size());
    double var = 0.0;
    for (double v : m.data) var += (v - mean) * (v - mean);
    return var / static_cast<double>(m.data.size());
  };
  auto blurred = data::gaussian_blur(p, strong, rng);
  CHECK(variance(blurred.grid) < variance(p.grid));

  Rng a(9), b(9);
  auto first = data::gaussian_blur(p, strong, a);
  auto second = data::gaussian_blur(p, strong, b);
  CHECK(first.grid.data == second.grid.data);
}

TEST_CASE("wav io") {
  auto dir = fs::temp_directory_path();
  auto path = dir / "acl_test_tone.wav";

  auto tone = sine(440.0, 8000, 400);
  data::write_wav_pcm16(path, tone, 8000);
  auto clip = data::read_wav(path);
  CHECK(clip.sample_rate == 8000);
  REQUIRE(clip.samples.size() == tone.size());
  for (std::size_t i = 0; i < tone.size(); ++i) {
    CHECK(std::abs(clip.samples[i] - tone[i]) <= 1.0 / 32766.0);
  }
  fs::remove(path);

  // Stereo averages channels; unknown chunks are skipped with pad bytes.
  auto stereo = write_temp("acl_test_stereo.wav",
                           wav_bytes(1, 2, 8000, 16, {1000, 3000, -2000, 2000}, true));
  auto sc = data::read_wav(stereo);
  REQUIRE(sc.samples.size() == 2);
  CHECK(std::abs(sc.samples[0] - 2000.0 / 32768.0) < 1e-12);
  CHECK(std::abs(sc.samples[1] - 0.0) < 1e-12);
  fs::remove(stereo);

  auto not_riff = write_temp("acl_test_bad.wav", "JUNKJUNKJUNKJUNKJUNK");
  CHECK_THROWS_AS(data::read_wav(not_riff), AclError);
  fs::remove(not_riff);

  auto bad_bits = write_temp("acl_test_8bit.wav", wav_bytes(1, 1, 8000, 8, {100}));
  CHECK_THROWS_AS(data::read_wav(bad_bits), AclError);
  fs::remove(bad_bits);

  auto float_fmt = write_temp("acl_test_float.wav", wav_bytes(3, 1, 8000, 16, {100}));
  CHECK_THROWS_AS(data::read_wav(float_fmt), AclError);
  fs::remove(float_fmt);

  auto whole = wav_bytes(1, 1, 8000, 16, {100, 200, 300});
  auto truncated = write_temp("acl_test_trunc.wav", whole.substr(0, whole.size() - 2));
  CHECK_THROWS_AS(data::read_wav(truncated), AclError);
  fs::remove(truncated);
}

TEST_CASE("audio corpus layout") {
  auto root = fs::temp_directory_path() / "acl_test_corpus";
  fs::remove_all(root);
  fs::create_directories(root / "siren");
  fs::create_directories(root / "dog");

  auto tone = sine(600.0, 8000, 300);
  data::write_wav_pcm16(root / "dog" / "b.wav", tone, 8000);
  data::write_wav_pcm16(root / "dog" / "a.wav", tone, 8000);
  data::write_wav_pcm16(root / "siren" / "x.wav", tone, 8000);

  auto corpus = data::load_audio_corpus(root);
  REQUIRE(corpus.class_names.size() == 2);
  CHECK(corpus.class_names[0] == "dog");
  CHECK(corpus.class_names[1] == "siren");
  REQUIRE(corpus.clips.size() == 3);
  CHECK(corpus.labels == std::vector<int>{0, 0, 1});

  fs::create_directories(root / "empty");
  CHECK_THROWS_AS(data::load_audio_corpus(root), AclError);
  fs::remove_all(root / "empty");

  fs::remove_all(root);
  fs::create_directories(root);
  CHECK_THROWS_AS(data::load_audio_corpus(root), AclError);
  fs::remove_all(root);
}

TEST_CASE("dataset csv round-trip") {
  auto path = fs::temp_directory_path() / "acl_test_ds.csv";

  data::SyntheticDatasetSpec spec;
  spec.n_classes = 2;
  spec.n_per_class = 5;
  spec.dim = 3;
  spec.seed = 77;
  auto ds = data::generate_synthetic(spec);

  data::save_dataset_csv(ds, path);
  auto loaded = data::load_dataset_csv(path);
  CHECK(loaded.labels == ds.labels);
  CHECK(loaded.x.data == ds.x.data);   // shortest round-trip formatting is exact
  fs::remove(path);

  auto bad_header = write_temp("acl_test_bad_header.csv", "foo,bar\n1,2\n");
  CHECK_THROWS_AS(data::load_dataset_csv(bad_header), AclError);
  fs::remove(bad_header);

  auto bad_row = write_temp("acl_test_bad_row.csv",
                            "label,feature_0,feature_1\n0,1.0,2.0\n1,oops,3.0\n");
  CHECK_THROWS_WITH_AS(data::load_dataset_csv(bad_row), doctest::Contains(":3"),
                       AclError);
  fs::remove(bad_row);

  auto short_row = write_temp("acl_test_short_row.csv",
                              "label,feature_0,feature_1\n0,1.0\n");
  CHECK_THROWS_AS(data::load_dataset_csv(short_row), AclError);
  fs::remove(short_row);

  auto nonfinite = write_temp("acl_test_inf.csv",
                              "label,feature_0,feature_1\n0,inf,2.0\n");
  CHECK_THROWS_AS(data::load_dataset_csv(nonfinite), AclError);
  fs::remove(nonfinite);
}
