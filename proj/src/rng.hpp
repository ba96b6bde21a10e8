#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace latentsearch {

// Portable draws: std::mt19937_64 output is fully specified, the standard
// distributions are not.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  /// [0, 1)
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  float uniform(float lo, float hi) { return static_cast<float>(lo + (hi - lo) * unit()); }
  /// Box-Muller; libm-dependent in the last bits, fine for test data.
  double normal() {
    const double u1 = 1.0 - unit();
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  uint64_t next() { return engine_(); }
  /// [0, n)
  uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace latentsearch
