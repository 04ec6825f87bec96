// Seeded, splittable random streams with portable value derivation.
//
// Distribution sampling is implemented directly on raw 64-bit draws so that
// sequences do not depend on the standard library's distribution internals.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace mdgru {

namespace detail {
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace detail

// xoshiro256** seeded via splitmix64.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = detail::splitmix64(sm);
  }

  // Independent child stream; the parent sequence is not consumed.
  Rng stream(std::string_view name) const {
    uint64_t mix = s_[0] ^ (s_[2] << 1) ^ detail::fnv1a(name);
    return Rng(mix);
  }
  Rng stream(std::string_view name, uint64_t index) const {
    uint64_t mix = s_[0] ^ (s_[2] << 1) ^ detail::fnv1a(name) ^
                   (0x9e3779b97f4a7c15ULL * (index + 1));
    return Rng(mix);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] (inclusive).
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

  bool bernoulli(double p_true) { return uniform() < p_true; }

  // Standard normal via Box-Muller (no rejection, sequence length is fixed).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Guard against log(0).
    if (u1 <= 0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4] = {};
  bool have_spare_ = false;
  double spare_ = 0;
};

}  // namespace mdgru
