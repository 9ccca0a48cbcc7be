#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace orbitfilter {

/// Deterministic random stream identified only by (seed, label).
///
/// The generator is SplitMix64 keyed by the seed and an FNV-1a hash of the
/// label, so the produced sequence is byte-identical on every platform. The
/// floating-point draws are derived from the top 53 bits of each word and
/// avoid the implementation-defined std:: distributions.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view label);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi]; lo == hi returns lo exactly.
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (cached pair).
  double normal();
  double normal(double mean, double stddev);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Child stream: same seed, label "<label>/<suffix>".
  Rng fork(std::string_view suffix) const;

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Deterministic 64-bit hash of a string (FNV-1a).
std::uint64_t hash_label(std::string_view label);

}  // namespace orbitfilter
