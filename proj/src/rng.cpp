#include "orbitfilter/rng.hpp"

#include <cmath>
#include <numbers>

#include "orbitfilter/error.hpp"

namespace orbitfilter {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed, std::string_view label)
    : seed_(seed), label_(label) {
  std::uint64_t mix = seed ^ 0x5851F42D4C957F2DULL;
  std::uint64_t key = splitmix64(mix) ^ hash_label(label);
  // One extra scramble so that seeds differing in a single bit diverge fully.
  state_ = splitmix64(key);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw Error("uniform: lo must not exceed hi");
  if (lo == hi) return lo;
  double v = lo + (hi - lo) * uniform();
  return v > hi ? hi : v;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::normal(double mean, double stddev) {
  if (!(stddev >= 0.0)) throw Error("normal: stddev must be non-negative");
  return mean + stddev * normal();
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error("below: n must be positive");
  // Lemire-style rejection keeps the draw unbiased.
  std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

Rng Rng::fork(std::string_view suffix) const {
  std::string child = label_;
  child += '/';
  child += suffix;
  return Rng(seed_, child);
}

}  // namespace orbitfilter
