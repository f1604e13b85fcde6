#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace mmtl {

// Counter-based generator: SplitMix64 evaluated at (key + i * golden) for
// i = 1, 2, ...  The key is a SplitMix64 hash chain over the seed and the
// stream tags, so the draw for (seed, tags, i) does not depend on which other
// streams were consumed first. Uniforms use the top 53 bits; normals use the
// Box-Muller transform (cosine branch first, sine branch cached).
class KeyedRng {
 public:
  KeyedRng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
    key_ = mix(seed ^ 0x6a09e667f3bcc909ULL);
    for (std::uint64_t tag : stream) key_ = mix(key_ ^ mix(tag + 0x3c6ef372fe94f82bULL));
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Rademacher sign, +1 or -1.
  double sign() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mmtl
