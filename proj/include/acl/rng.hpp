#pragma once

#include <cmath>
#include <cstdint>

namespace acl {

// Counter-based splittable PRNG built on the splitmix64 output function.
// A stream is (key, counter); draw i of stream k is
//   finalize(key + (i+1) * 0x9E3779B97F4A7C15)
// which is splitmix64 evaluated at an arbitrary counter offset, so streams
// support random access and never share state. Substreams are derived by
// hashing (key XOR salt, tag) through the same function, giving every
// (seed, item, view, ...) tuple its own independent sequence. The full
// construction is documented in README.md and must not change: datasets and
// augmentations are reproducible only while every draw stays bit-identical.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  // Independent substream for `tag`; does not disturb this stream's counter.
  Rng split(std::uint64_t tag) const {
    return Rng(finalize((key_ ^ kSplitSalt) + (tag + 1) * kGolden));
  }

  std::uint64_t next_u64() { return finalize(key_ + (++ctr_) * kGolden); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double next_open() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Box-Muller (cosine branch); consumes exactly two draws per call.
  double next_gaussian() {
    double u1 = next_open();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Uniform in [0, n); Lemire's multiply-shift map, one draw per call.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return ctr_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSplitSalt = 0xA5A5B5B5C5C5D5D5ULL;
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  static std::uint64_t finalize(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace acl
