#pragma once

// Counter-based pseudo-random generation built on the SplitMix64 finalizer
// (Steele, Lea & Flood, OOPSLA 2014; mixing constants from D. Stafford's
// variant 13). Every draw is a pure function of (key, counter) and every
// substream key is a pure function of (key, label), so individual matrix
// entries, trials and noise vectors can be regenerated independently, in
// any order, on any thread, with bit-identical results across platforms.

#include <cmath>
#include <cstdint>

namespace jtcs::rng {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// k-th raw 64-bit output of the stream identified by `key`.
constexpr std::uint64_t bits_at(std::uint64_t key, std::uint64_t k) noexcept {
  return mix64(key + (k + 1) * kGoldenGamma);
}

// Key of a child stream. The xor constant keeps child keys out of the
// output counter space of the parent.
constexpr std::uint64_t substream(std::uint64_t key, std::uint64_t label) noexcept {
  return mix64((key ^ 0xD1B54A32D192ED03ull) + (label + 1) * kGoldenGamma);
}

// Uniform on [0, 1) with 53 random mantissa bits.
inline double uniform_at(std::uint64_t key, std::uint64_t k) noexcept {
  return static_cast<double>(bits_at(key, k) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on counters (2k, 2k+1). The first uniform
// is shifted into (0, 1] so the logarithm is always finite.
inline double gaussian_at(std::uint64_t key, std::uint64_t k) noexcept {
  constexpr double two_pi = 6.283185307179586476925286766559;
  const double u1 =
      static_cast<double>((bits_at(key, 2 * k) >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform_at(key, 2 * k + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

// Sequential reader over one stream, for call sites that consume draws in
// order. Uniform draws advance the counter by one, gaussians by two.
class Stream {
 public:
  explicit Stream(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t bits() noexcept { return bits_at(key_, next_++); }
  double uniform() noexcept { return uniform_at(key_, next_++); }

  double gaussian() noexcept {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 =
        static_cast<double>((bits_at(key_, next_) >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform_at(key_, next_ + 1);
    next_ += 2;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  Stream child(std::uint64_t label) const noexcept {
    return Stream(substream(key_, label));
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t next_ = 0;
};

}  // namespace jtcs::rng
