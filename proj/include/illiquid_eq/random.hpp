#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace illiquid_eq {

/// Stateless normal draws keyed by (seed, path, step): any path can be regenerated alone.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t bits(std::uint64_t path, std::uint64_t step, std::uint64_t lane) const noexcept {
    std::uint64_t h = mix(seed_ ^ 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ path);
    h = mix(h ^ (step * 2 + lane));
    return h;
  }

  /// Uniform on (0, 1].
  double uniform(std::uint64_t path, std::uint64_t step, std::uint64_t lane) const noexcept {
    return (static_cast<double>(bits(path, step, lane) >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on two independent lanes.
  double normal(std::uint64_t path, std::uint64_t step) const noexcept {
    const double u1 = uniform(path, step, 0);
    const double u2 = uniform(path, step, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace illiquid_eq
