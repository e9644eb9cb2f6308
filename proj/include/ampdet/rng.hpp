#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace ampdet {

// Counter-based random stream: output k is a SplitMix64-style hash of
// (base + k), so draws are random access and streams with distinct bases
// never interact. Scene sampling gives each component (positions,
// shadowing, fading, activity, pilots, noise) its own stream, which keeps
// draws reproducible even when another component's draw count changes.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : base_(mix(mix(seed) + 0x632be59bd9b4e019ULL * (stream_id + 1))), counter_(0) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }

  result_type operator()() { return mix(base_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 6.283185307179586476925286766559 * uniform();
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

  // Circularly symmetric complex normal with unit total variance, E|v|^2 = 1.
  std::complex<double> cgaussian() {
    const double s = 0.70710678118654752440;
    const double re = gaussian();
    const double im = gaussian();
    return {s * re, s * im};
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t base_;
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ampdet
