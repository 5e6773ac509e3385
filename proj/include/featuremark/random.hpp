// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>

#include "featuremark/hash.hpp"

namespace featuremark {

/*!
 * Philox4x32-10 counter-based generator (Salmon et al., SC'11).
 *
 * The output for a counter depends only on (key, counter), so a stream can be
 * truncated, resumed, or split by index without replaying earlier draws.
 */
class Philox4x32 {
 public:
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static constexpr counter_type block(counter_type ctr, key_type key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static constexpr counter_type single_round(const counter_type& c, const key_type& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/*!
 * A 64-bit stream addressed by (seed, stream id, position).
 *
 * `at(i)` is a pure function of its arguments; `operator()` walks positions in
 * order. Satisfies UniformRandomBitGenerator, but all library sampling goes
 * through the portable helpers below rather than <random> distributions, whose
 * output is implementation-defined.
 */
class CounterStream {
 public:
  using result_type = std::uint64_t;

  constexpr CounterStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  /// Independent child stream; children of distinct ids never share blocks.
  constexpr CounterStream split(std::uint64_t child) const noexcept {
    const std::uint64_t seed = (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
    return CounterStream(hash_combine(hash_combine(seed, stream_), child), 0);
  }

  constexpr std::uint64_t at(std::uint64_t position) const noexcept {
    const Philox4x32::counter_type ctr{static_cast<std::uint32_t>(position),
                                       static_cast<std::uint32_t>(position >> 32),
                                       static_cast<std::uint32_t>(stream_),
                                       static_cast<std::uint32_t>(stream_ >> 32)};
    const auto out = Philox4x32::block(ctr, key_);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  }

  constexpr result_type operator()() noexcept { return at(position_++); }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr std::uint64_t position() const noexcept { return position_; }

 private:
  Philox4x32::key_type key_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
};

/// Uniform in [0, 1).
template <class Gen>
double uniform01(Gen& gen) {
  return to_unit_interval(gen());
}

/// Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
template <class Gen>
std::uint64_t uniform_below(Gen& gen, std::uint64_t bound) {
  if (bound <= 1) return 0;
  while (true) {
    const std::uint64_t x = gen();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
    const auto low = static_cast<std::uint64_t>(m);
    if (low >= bound || low >= (-bound) % bound) return static_cast<std::uint64_t>(m >> 64);
  }
}

/// In-place partial Fisher-Yates: the first `k` slots end up a uniform
/// sample without replacement.
template <class T, class Gen>
void partial_shuffle(std::span<T> items, std::size_t k, Gen& gen) {
  const std::size_t n = items.size();
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(gen, n - i));
    std::swap(items[i], items[j]);
  }
}

}  // namespace featuremark
