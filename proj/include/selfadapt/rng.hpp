#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace selfadapt {

/// Counter-based 64-bit random stream.
///
/// Output number i (1-based) of a stream with key k is
///   mix64(k + i * 0x9E3779B97F4A7C15)
/// where mix64 is the SplitMix64 finalizer. A stream is therefore fully
/// described by (key, counter), and `split(n)` derives an independent child
/// stream whose key is mix64(k ^ mix64(n + 0xD1B54A32D192ED03)). Everything
/// is defined on unsigned 64-bit arithmetic, so sequences are identical on
/// every platform.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : key_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  result_type next() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }
  result_type operator()() noexcept { return next(); }

  /// Child stream number `index`; does not advance this stream.
  [[nodiscard]] Rng split(std::uint64_t index) const noexcept {
    return Rng(mix64(key_ ^ mix64(index + kSplitSalt)));
  }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_int(std::uint64_t bound) noexcept {
    // 2^64 mod bound; values below it are rejected to remove modulo bias.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % bound;
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Always consumes exactly one draw.
  bool bernoulli(double p) noexcept { return uniform01() < p; }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal() noexcept {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSplitSalt = 0xD1B54A32D192ED03ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace selfadapt
