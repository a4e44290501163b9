#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace quadeff {

// Seeded Gaussian source with a fixed transform so traces are reproducible
// across standard libraries: std::mt19937_64 (whose output sequence is
// standardized) feeds a Box-Muller transform. Uniforms are built from the top
// 53 bits of each draw; u1 is shifted into (0, 1] so log(u1) is finite.
// Both Box-Muller outputs are used, cos branch first.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

  double standard() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double operator()(double mean, double stddev) { return mean + stddev * standard(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace quadeff
