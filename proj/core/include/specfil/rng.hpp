#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "specfil/matrix.hpp"

namespace specfil {

/// PCG64 (XSL-RR 128/64) with an explicit seeding contract.
///
/// The generator algorithm is part of the on-disk format contract: checkpoints
/// store the raw 128-bit state and increment, and every sampled quantity
/// (splits, batches, initializers, RFF frequencies) must replay bit-exactly
/// from (seed, stream) on any platform. std::mt19937 plus the standard
/// distributions would not give that guarantee, so the distributions below are
/// spelled out too.
class Pcg64 {
 public:
  Pcg64() : Pcg64(0xcafef00dd15ea5e5ULL, 0) {}

  /// Seeds the generator. `stream` selects one of 2^63 independent sequences;
  /// both words are scrambled through splitmix64 before use.
  explicit Pcg64(std::uint64_t seed, std::uint64_t stream = 0) {
    const auto lo = splitmix64(seed);
    const auto hi = splitmix64(lo ^ 0x9e3779b97f4a7c15ULL);
    inc_ = (static_cast<u128>(splitmix64(stream)) << 64 | splitmix64(stream ^ 0xda3e39cb94b95bdbULL)) | 1;
    state_ = 0;
    next_u64();
    state_ += static_cast<u128>(hi) << 64 | lo;
    next_u64();
  }

  std::uint64_t next_u64() {
    state_ = state_ * kMultiplier + inc_;
    const auto xored = static_cast<std::uint64_t>(state_ >> 64) ^ static_cast<std::uint64_t>(state_);
    const auto rot = static_cast<unsigned>(state_ >> 122);
    return (xored >> rot) | (xored << ((-rot) & 63u));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Unbiased uniform integer in [0, bound) via rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (-bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Standard normal via Box-Muller (both values used, cached).
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_below(i)]);
    }
  }

  /// Uniform random permutation of [0, n).
  std::vector<Index> permutation(Index n) {
    std::vector<Index> p(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    shuffle(p);
    return p;
  }

  /// Sorted uniform sample of k distinct values from [0, n).
  std::vector<Index> sample_without_replacement(Index n, Index k) {
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < k; ++i) {
      const auto j = i + static_cast<Index>(next_below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  struct State {
    std::uint64_t state_hi, state_lo, inc_hi, inc_lo;
  };
  State save() const {
    return {static_cast<std::uint64_t>(state_ >> 64), static_cast<std::uint64_t>(state_),
            static_cast<std::uint64_t>(inc_ >> 64), static_cast<std::uint64_t>(inc_)};
  }
  void restore(const State& s) {
    state_ = static_cast<u128>(s.state_hi) << 64 | s.state_lo;
    inc_ = static_cast<u128>(s.inc_hi) << 64 | s.inc_lo;
    has_spare_ = false;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  /// Derives a stable child seed for a named substream.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream_id) {
    return splitmix64(seed ^ splitmix64(stream_id));
  }

 private:
  using u128 = unsigned __int128;
  static constexpr u128 kMultiplier = (static_cast<u128>(2549297995355413924ULL) << 64) | 4865540595714422341ULL;

  u128 state_ = 0;
  u128 inc_ = 1;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace specfil
