#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "survrr/errors.hpp"

namespace survrr {

// Counter-based random stream. A stream is identified by (seed, stream id);
// the generator state is a pure function of that identity, so independent
// streams never share state and replicates can run in any order. The output
// function is the splitmix64 finalizer over a Weyl sequence, and substreams
// are derived by remixing the identity key, not by splitting the state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed + kGolden) ^ mix(stream + kLeaf))), ctr_(0) {}

  // Child stream derived from this stream's identity; unaffected by and not
  // affecting this stream's position.
  RngStream substream(std::uint64_t id) const {
    RngStream r(0, 0);
    r.key_ = mix(key_ ^ mix(id + kLeaf));
    r.ctr_ = 0;
    return r;
  }

  std::uint64_t next_u64() { return mix(key_ + (++ctr_) * kGolden); }

  // Uniform on (0,1): 53-bit mantissa, never exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double exponential(double rate) {
    if (rate <= 0.0) throw DomainError("exponential: rate must be positive");
    return -std::log(uniform()) / rate;
  }

  // Uniform integer on [0, bound) by rejection, bound >= 1.
  std::uint64_t uniform_int(std::uint64_t bound) {
    if (bound == 0) throw DomainError("uniform_int: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_int(i)]);
    }
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kLeaf = 0xD1B54A32D192ED03ull;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t ctr_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace survrr
