#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace hsrd {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// The 128-bit counter is split as {block_lo, block_hi, stream_lo, stream_hi};
// the 64-bit seed is the key.  Distinct stream ids give independent
// sequences, which is how per-sample streams are derived.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using block_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  static block_type block(block_type ctr, key_type key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += W0;
        key[1] += W1;
      }
      const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
      const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
      const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

  result_type operator()() {
    if (pos_ == 4) {
      block_type ctr{std::uint32_t(counter_), std::uint32_t(counter_ >> 32),
                     std::uint32_t(stream_), std::uint32_t(stream_ >> 32)};
      buf_ = block(ctr, {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)});
      ++counter_;
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = (*this)();
    return (hi << 32) | (*this)();
  }

  // uniform on the open interval (0,1), 53 bits
  double uniform() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  // Box-Muller; one spare value is cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  // uniform integer in [0, n) by rejection
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  Philox4x32 split(std::uint64_t stream_id) const {
    return Philox4x32(seed_, (stream_ * 0x9E3779B97F4A7C15ull) ^ (stream_id + 1));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  block_type buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

using Rng = Philox4x32;

}  // namespace hsrd
