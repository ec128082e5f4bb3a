#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace spirit {

/// SplitMix64 finalizer. Used to derive independent stream keys from a
/// (seed, stream-id, ...) tuple so that grid cells do not depend on the
/// order in which they are scheduled.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t key = mix64(seed);
  for (std::uint64_t t : tags) key = mix64(key ^ mix64(t + 0x632be59bd9b4e019ULL));
  return key;
}

/// Explicitly-passed random source. No global state anywhere in the library.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) : engine_(derive_seed(seed, stream)) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  /// Fresh generator for a named sub-stream; does not advance this one.
  Rng split(std::uint64_t stream) const { return Rng(derive_seed(key_hint(), {stream})); }

 private:
  std::uint64_t key_hint() const {
    std::mt19937_64 copy = engine_;
    return copy();
  }
  std::mt19937_64 engine_;
};

}  // namespace spirit
