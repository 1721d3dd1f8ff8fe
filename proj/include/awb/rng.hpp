#pragma once

#include <cstdint>
#include <string_view>

namespace awb {

/// SplitMix64 stream. Integer-only state transitions and explicit float
/// conversions, so a seed produces the same values on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (no cached second value).
  double normal();

  /// Independent child stream keyed by an integer or a name; does not
  /// advance this stream.
  Rng split(std::uint64_t key) const;
  Rng split(std::string_view key) const;

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

}  // namespace awb
