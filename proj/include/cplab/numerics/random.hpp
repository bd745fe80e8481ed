#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace cplab {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon, Moraes, Dror, Shaw 2011).
inline constexpr PhiloxBlock philox4x32_10(PhiloxBlock ctr, PhiloxKey key) noexcept {
  constexpr std::uint32_t kMul0 = 0xD2511F53U;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
#pragma GCC unroll 10
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
           static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
           static_cast<std::uint32_t>(p0)};
  }
  return ctr;
}

/// Counter-based random stream addressed by (master seed, index path).
///
/// The master seed is the Philox key; the index path is hashed into the upper
/// half of the 128-bit counter and the lower half counts blocks. Streams with
/// distinct paths never share counter values (up to 64-bit hash collisions),
/// so any replicate can be regenerated in isolation and in any order.
///
/// Satisfies UniformRandomBitGenerator. Single owner; copy to fork.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t master_seed) noexcept
      : seed_(master_seed), path_(detail::splitmix64(master_seed ^ 0x6A09E667F3BCC909ULL)) {}

  /// Child stream for index `index` below this stream's path.
  RandomStream derive(std::uint64_t index) const noexcept {
    RandomStream child(*this);
    child.path_ = detail::splitmix64(path_ ^ detail::splitmix64(index + 0x3C6EF372FE94F82BULL));
    child.block_ = 0;
    child.pos_ = kWordsPerBlock;
    return child;
  }

  template <class... Indices>
  RandomStream derive(std::uint64_t first, Indices... rest) const noexcept {
    if constexpr (sizeof...(rest) == 0) {
      return derive(first);
    } else {
      return derive(first).derive(static_cast<std::uint64_t>(rest)...);
    }
  }

  std::uint64_t master_seed() const noexcept { return seed_; }
  std::uint64_t path_hash() const noexcept { return path_; }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (pos_ == kWordsPerBlock) refill();
    return words_[pos_++];
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return boost::random::normal_distribution<double>{}(*this); }

  /// Exponential variate with the given rate.
  double exponential(double rate) {
    return boost::random::exponential_distribution<double>{rate}(*this);
  }

 private:
  static constexpr int kWordsPerBlock = 2;

  void refill() noexcept {
    const PhiloxBlock ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)};
    const PhiloxKey key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    const PhiloxBlock out = philox4x32_10(ctr, key);
    words_[0] = (std::uint64_t{out[1]} << 32) | out[0];
    words_[1] = (std::uint64_t{out[3]} << 32) | out[2];
    ++block_;
    pos_ = 0;
  }

  std::uint64_t seed_;
  std::uint64_t path_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, kWordsPerBlock> words_{};
  int pos_ = kWordsPerBlock;
};

}  // namespace cplab
