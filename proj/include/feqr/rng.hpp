#pragma once

#include <cstdint>

namespace feqr {

namespace detail {

// splitmix64 finalizer; full-avalanche 64->64 mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                      std::uint64_t& lo) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(prod >> 64);
  lo = static_cast<std::uint64_t>(prod);
}

}  // namespace detail

// Philox-style 2x64 counter-based generator, 10 rounds. A stream is a
// 64-bit key; output at counter c is a pure function of (key, c), so
// draws can be evaluated in any order on any thread.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  // Derives a child stream key; used for replication and component streams.
  static std::uint64_t child(std::uint64_t key, std::uint64_t index) {
    return detail::mix64(key ^ (0x9e3779b97f4a7c15ull * (index + 1)));
  }

  std::uint64_t bits(std::uint64_t counter) const {
    constexpr std::uint64_t mult = 0xd2b74407b1ce6e93ull;
    constexpr std::uint64_t weyl = 0x9e3779b97f4a7c15ull;
    std::uint64_t x0 = counter;
    std::uint64_t x1 = 0x853c49e6748fea9bull;
    std::uint64_t k = key_;
    for (int round = 0; round < 10; ++round) {
      std::uint64_t hi, lo;
      detail::mulhilo64(mult, x0, hi, lo);
      x0 = hi ^ k ^ x1;
      x1 = lo;
      k += weyl;
    }
    return x0 ^ x1;
  }

  // Uniform draw strictly inside (0,1): (mantissa + 0.5) * 2^-53.
  double uniform01(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace feqr
