#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "acl/data.hpp"
#include "acl/io.hpp"

namespace acl {
namespace data {

namespace {

std::uint32_t le_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

WavClip read_wav(const std::filesystem::path& path) {
  std::string raw = io::read_file(path);
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  const std::string where = path.string();
  auto fail = [&](const std::string& what) { raise(Err::DataError, where + ": " + what); };

  if (raw.size() < 12 || raw.compare(0, 4, "RIFF") != 0 || raw.compare(8, 4, "WAVE") != 0) {
    fail("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t sample_rate = 0;
  std::size_t data_off = 0, data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    std::string id = raw.substr(pos, 4);
    std::uint32_t size = le_u32(bytes + pos + 4);
    pos += 8;
    if (pos + size > raw.size()) fail("truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) fail("fmt chunk too small");
      format = le_u16(bytes + pos);
      channels = le_u16(bytes + pos + 2);
      sample_rate = le_u32(bytes + pos + 4);
      bits = le_u16(bytes + pos + 14);
      have_fmt = true;
    } else if (id == "data") {
      data_off = pos;
      data_len = size;
    }
    pos += size + (size % 2);  // RIFF chunks are padded to even length
  }

  if (!have_fmt) fail("missing fmt chunk");
  if (data_off == 0 && data_len == 0) fail("missing data chunk");
  if (format != 1) fail("only PCM (format 1) is supported");
  if (bits != 16) fail("only 16-bit samples are supported");
  if (channels != 1 && channels != 2) fail("only mono or stereo is supported");
  if (sample_rate == 0) fail("sample rate is zero");
  std::size_t frame_bytes = 2u * channels;
  if (data_len % frame_bytes != 0) fail("data chunk is not a whole number of frames");

  WavClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  std::size_t frames = data_len / frame_bytes;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* p = bytes + data_off + i * frame_bytes;
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      std::int16_t s;
      std::memcpy(&s, p + 2 * c, 2);
      acc += static_cast<double>(s) / 32768.0;
    }
    clip.samples[i] = acc / channels;
  }
  return clip;
}

void write_wav_pcm16(const std::filesystem::path& path, const std::vector<double>& samples,
                     int sample_rate) {
  if (sample_rate <= 0) raise(Err::ConfigError, "write_wav_pcm16: sample_rate must be > 0");
  std::string out;
  out.reserve(44 + samples.size() * 2);
  std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_len);
  for (double v : samples) {
    double c = std::clamp(v, -1.0, 1.0);
    auto s = static_cast<std::int16_t>(std::lround(c * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(s));
  }
  io::write_file(path, out);
}

AudioCorpus load_audio_corpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    raise(Err::DataError, root.string() + ": not a directory");
  }
  std::set<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.insert(entry.path().filename().string());
  }
  if (class_dirs.empty()) {
    raise(Err::DataError, root.string() + ": no class subdirectories");
  }

  AudioCorpus corpus;
  for (const std::string& name : class_dirs) {
    int label = static_cast<int>(corpus.class_names.size());
    corpus.class_names.push_back(name);
    std::set<std::string> files;
    for (const auto& entry : fs::directory_iterator(root / name)) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") {
        files.insert(entry.path().filename().string());
      }
    }
    if (files.empty()) {
      raise(Err::DataError, (root / name).string() + ": class has no .wav files");
    }
    for (const std::string& file : files) {
      corpus.clips.push_back(read_wav(root / name / file));
      corpus.labels.push_back(label);
    }
  }
  if (corpus.clips.empty()) {
    raise(Err::DataError, root.string() + ": no .wav files found");
  }
  return corpus;
}

}  // namespace data
}  // namespace acl
