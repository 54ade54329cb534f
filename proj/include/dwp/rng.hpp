#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>

#include "dwp/dsp.hpp"

namespace dwp {

/// Stage tags separate the independent draw streams used for one packet.
enum class Stage : std::uint64_t {
  misc = 0,
  payload = 1,
  channel = 2,
  noise = 3,
  impairment = 4,
  heltf = 5,
  init = 6,
  shuffle = 7,
  phase_noise = 8,
};

/// Counter-based generator: output i is a bijective 64-bit mix of
/// (key + i * golden), with the key derived from (seed, stream, stage).
/// Identical keys give identical sequences on every platform; the Gaussian
/// transform uses only <cmath> log/sqrt/cos/sin.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream = 0, Stage stage = Stage::misc);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  std::uint8_t bit() { return static_cast<std::uint8_t>(next_u64() >> 63); }
  double normal();
  /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  cplx complex_normal(double variance);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_normal_;
};

/// SplitMix64 finalizer; exposed for deterministic id derivation.
std::uint64_t mix64(std::uint64_t x);

/// Combines a list of integers into one well-mixed 64-bit id.
std::uint64_t hash_ids(std::initializer_list<std::uint64_t> ids);

}  // namespace dwp
