#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace fgsa {

/**
 * Counter-based random numbers (Philox-4x32, 10 rounds). A variate is a pure
 * function of (seed, stream, position), so any subset of streams can be drawn
 * in any order, on any number of workers, with bit-identical results.
 */
namespace rng {

namespace detail {

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
  constexpr std::uint64_t M0 = 0xD2511F53ull;
  constexpr std::uint64_t M1 = 0xCD9E8D57ull;
  const std::uint64_t p0 = M0 * ctr[0];
  const std::uint64_t p1 = M1 * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  key[0] += 0x9E3779B9u;  // golden ratio
  key[1] += 0xBB67AE85u;  // sqrt(3)-1
}

}  // namespace detail

/** One 128-bit Philox block for the given key and counter. */
inline std::array<std::uint32_t, 4> philox_block(std::uint64_t seed, std::uint64_t ctr_hi,
                                                 std::uint64_t ctr_lo) {
  std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(ctr_lo), static_cast<std::uint32_t>(ctr_lo >> 32),
      static_cast<std::uint32_t>(ctr_hi), static_cast<std::uint32_t>(ctr_hi >> 32)};
  std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                      static_cast<std::uint32_t>(seed >> 32)};
  for (int round = 0; round < 10; ++round) detail::philox_round(ctr, key);
  return ctr;
}

/**
 * Position-addressed stream of variates for one (seed, stream) pair. Stream
 * index and position form the 128-bit Philox counter; each block yields two
 * 64-bit words.
 */
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t u64_at(std::uint64_t pos) const {
    const auto block = philox_block(seed_, stream_, pos >> 1);
    const int word = static_cast<int>(pos & 1u);
    return (static_cast<std::uint64_t>(block[2 * word + 1]) << 32) | block[2 * word];
  }

  /** Uniform double in the open interval (0,1); safe for inverse CDFs. */
  double open01_at(std::uint64_t pos) const {
    return (static_cast<double>(u64_at(pos) >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t next_u64() { return u64_at(pos_++); }
  double next_open01() { return open01_at(pos_++); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t pos_ = 0;
};

/**
 * Inverse standard-normal CDF: Acklam's rational approximation polished by
 * one Halley step through std::erfc, accurate to ~1e-15 relative over (0,1).
 */
inline double normal_icdf(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("normal_icdf: u must be in (0,1)");

  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};

  constexpr double u_low = 0.02425;
  double x;
  if (u < u_low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - u_low) {
    const double q = u - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement: f(x) = Phi(x) - u with Phi via erfc.
  constexpr double sqrt2 = 1.4142135623730951;
  constexpr double sqrt_2pi = 2.5066282746310002;
  const double err = 0.5 * std::erfc(-x / sqrt2) - u;
  const double g = err * sqrt_2pi * std::exp(0.5 * x * x);  // f / f'
  x -= g / (1.0 + 0.5 * x * g);
  return x;
}

}  // namespace rng
}  // namespace fgsa
