#pragma once
#include <bit>
#include <cstdint>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mfcx {

// Splitmix-style counter generator with a per-stream odd increment.
// Chosen over std::mt19937 so that streams are cheap to fork (two u64
// of state) and output is identical across platforms and standard
// libraries. Forked children get their own increment, hence their own
// counter orbit: with a shared increment all streams are time shifts
// of one sequence and nearby forks can overlap, which shows up as
// cross-particle correlation in ensemble statistics.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : state_(seed), inc_(kGolden) {}

  std::uint64_t next_u64() { return mix64(state_ += inc_); }

  // uniform in [0,1); 53-bit resolution
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; one value per call, spare cached
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Independent child stream: state and increment both derived by the
  // strong mixer from (parent state, index). Equal (seed, index) gives
  // the same stream, so per-particle forks do not depend on scheduling.
  Prng fork(std::uint64_t index) const {
    Prng child(0);
    std::uint64_t base = state_ + kGolden * (index + 1);
    child.state_ = mix64(base);
    child.inc_ = mix_gamma(base + kGolden);
    return child;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // odd, and rejected if the bit pattern is too regular for the mixer
  static std::uint64_t mix_gamma(std::uint64_t z) {
    std::uint64_t g = mix64(z) | 1ull;
    if (std::popcount(g ^ (g >> 1)) < 24) g ^= 0xaaaaaaaaaaaaaaaaull;
    return g;
  }

  std::uint64_t state_;
  std::uint64_t inc_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Inverse-CDF sampler over a fixed weight vector. Weights need not be
// normalized; zero-weight entries are never drawn.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const std::vector<double>& weights);
  std::size_t operator()(Prng& rng) const { return draw(rng.next_uniform()); }
  // maps u in [0,1) to an index; exposed for stratified draws
  std::size_t draw(double u) const;

 private:
  std::vector<double> cum_;
};

}  // namespace mfcx
