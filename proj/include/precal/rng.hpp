#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <random>
#include <span>

namespace precal {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Combines identifying integers (step counters, case indices, content hashes)
// into a single stream id.  Order-sensitive by construction.
inline std::uint64_t mix_stream(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;  // arbitrary nonzero start
  for (std::uint64_t p : parts) h = detail::splitmix64(h ^ p);
  return h;
}

// FNV-1a over the raw bytes of a double sequence.  Used to key per-example
// sampling streams by content, so that duplicated rows draw identical noise.
inline std::uint64_t content_hash(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// Deterministic random stream addressed by (seed, stream id).  The same pair
// yields the same draw sequence on every run and under any thread count; all
// parallel code derives one stream per unit of work instead of sharing
// generators.  mt19937_64 is fully specified by the standard, and the
// uniform/normal transforms below avoid std::*_distribution, whose output is
// implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1): 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the partner draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n).  Rejection-free modulo bias is irrelevant at
  // our scales (n far below 2^32), but keep it exact anyway.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = ~0ULL - ~0ULL % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  RngStream substream(std::uint64_t salt) const {
    return RngStream(seed_, mix_stream({stream_, salt}));
  }

 private:
  static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    // Expand (seed, stream) through splitmix64 so that nearby pairs do not
    // produce correlated engine states.
    std::uint64_t s0 = detail::splitmix64(seed ^ 0x8a5cd789635d2dffULL);
    std::uint64_t s1 = detail::splitmix64(stream ^ s0);
    std::seed_seq seq{static_cast<std::uint32_t>(s0), static_cast<std::uint32_t>(s0 >> 32),
                      static_cast<std::uint32_t>(s1), static_cast<std::uint32_t>(s1 >> 32)};
    return std::mt19937_64(seq);
  }

  std::uint64_t seed_, stream_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace precal
