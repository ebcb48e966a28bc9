#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hypelift {

/// Seedable, platform-independent random stream.
///
/// Engine: std::mt19937_64 (its output sequence is fixed by the C++
/// standard). The std distributions are implementation-defined, so the
/// conversions are done here:
///   uniform(): top 53 bits of one draw, scaled by 2^-53, in [0, 1).
///   normal():  Box-Muller on two uniforms, returns the cosine branch and
///              caches the sine branch for the next call.
/// Sub-streams for (seed, view, mask, ...) are derived with SplitMix64
/// mixing so that each tuple gets an independent engine seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Stream seeded from a tuple of integers, e.g. derive(seed, {view, mask}).
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer in [0, n). Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace hypelift
