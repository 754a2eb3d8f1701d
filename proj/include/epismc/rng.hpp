#pragma once

#include <cmath>
#include <cstdint>

namespace epismc {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ (splitmix64(b) + kGolden + (a << 6) + (a >> 2)));
}

}  // namespace detail

// Address of a random stream. Distinct (seed, stream) pairs give
// statistically independent sequences; equal pairs give equal sequences.
// Streams are derived by hashing, never by splitting generator state, so
// any parallel schedule that assigns the same keys sees the same draws.
struct RngKey {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  [[nodiscard]] constexpr RngKey child(std::uint64_t id) const noexcept {
    return RngKey{seed, detail::hash_combine(stream, id)};
  }
  [[nodiscard]] constexpr RngKey child(std::uint64_t a, std::uint64_t b) const noexcept {
    return child(a).child(b);
  }
  [[nodiscard]] constexpr RngKey child(std::uint64_t a, std::uint64_t b,
                                       std::uint64_t c) const noexcept {
    return child(a).child(b).child(c);
  }
};

// xoshiro256++ seeded from a key through splitmix64. Satisfies
// UniformRandomBitGenerator, so <random> distributions can run on top of it.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(RngKey key) noexcept {
    std::uint64_t x = detail::hash_combine(detail::splitmix64(key.seed), key.stream);
    for (auto& w : s_) {
      x = detail::splitmix64(x);
      w = x;
    }
    // all-zero state is invalid for xoshiro
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[3] = detail::kGolden;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~std::uint64_t{0}; }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on [0, 1)
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1]
  double uniform_pos() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  // standard normal via Box-Muller, keeping the second value of each pair
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double theta = 6.283185307179586476925286766559 * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
  double spare_ = 0;
  bool has_spare_ = false;
};

}  // namespace epismc
