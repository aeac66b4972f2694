// Deterministic seeded randomness. Every stream is derived from one master
// seed plus a stream name, so artifacts are bit-reproducible run to run.
// Uniform and normal draws are generated explicitly (53-bit mantissa mapping,
// Box-Muller) rather than through std:: distributions, whose output is
// implementation-defined.

#ifndef SVBMPC_RNG_HPP
#define SVBMPC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace svbmpc {

inline std::uint64_t fnv1a64(std::string_view s)
{
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view name)
  {
    const std::uint64_t h = fnv1a64(name);
    std::seed_seq seq{
        static_cast<std::uint32_t>(master_seed),
        static_cast<std::uint32_t>(master_seed >> 32),
        static_cast<std::uint32_t>(h),
        static_cast<std::uint32_t>(h >> 32),
    };
    engine_.seed(seq);
  }

  /// Uniform in [0, 1).
  double uniform01()
  {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; draws are cached in pairs.
  double normal()
  {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace svbmpc

#endif  // SVBMPC_RNG_HPP
