#pragma once

#include <cstdint>
#include <limits>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace trapk {

/// Identifies one independent random stream.
///
/// A stream is fully determined by (master_seed, replica_index, stream);
/// the same triple always yields the same sequence of draws. `stream`
/// separates purposes that share a replica index (disorder vs dynamics).
struct RngSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t replica_index = 0;
  std::uint64_t stream = 0;

  RngSpec replica(std::uint64_t index) const { return {master_seed, index, stream}; }
  RngSpec substream(std::uint64_t tag) const { return {master_seed, replica_index, tag}; }

  friend bool operator==(const RngSpec&, const RngSpec&) = default;
};

namespace stream_tag {
inline constexpr std::uint64_t kDynamics = 0;
inline constexpr std::uint64_t kDisorder = 1;
inline constexpr std::uint64_t kStart = 2;
inline constexpr std::uint64_t kGamma = 3;
}  // namespace stream_tag

/// SplitMix64 finalizer, used to spread seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** (Blackman and Vigna), a UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  explicit Xoshiro256(std::uint64_t seed = 0) {
    for (auto& w : s_) w = splitmix64(seed);
  }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  friend bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

using Engine = Xoshiro256;

inline Engine make_engine(const RngSpec& spec) {
  // Absorb the three words through the mixer so nearby triples decorrelate.
  std::uint64_t state = spec.master_seed;
  std::uint64_t h = splitmix64(state);
  state = h ^ spec.replica_index;
  h = splitmix64(state);
  state = h ^ spec.stream;
  return Engine(splitmix64(state));
}

/// Uniform on the open interval (0, 1) with 53 bits of resolution.
inline double uniform_open(Engine& gen) {
  return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
}

/// Rate-1 exponential (ziggurat).
inline double standard_exponential(Engine& gen) {
  return boost::random::exponential_distribution<double>{}(gen);
}

/// Standard normal (ziggurat).
inline double standard_normal(Engine& gen) { return boost::random::normal_distribution<double>{}(gen); }

/// Uniform integer in [0, n) by multiply-shift with rejection (exact).
inline std::uint64_t uniform_index(Engine& gen, std::uint64_t n) {
  using u128 = unsigned __int128;
  u128 m = static_cast<u128>(gen()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<u128>(gen()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace trapk
