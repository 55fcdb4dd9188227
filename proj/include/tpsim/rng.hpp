#ifndef TPSIM_RNG_HPP
#define TPSIM_RNG_HPP

#include <cstdint>
#include <span>
#include <utility>

namespace tpsim {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based stream: value i of stream (seed, a, b) is
/// mix64(key(seed, a, b) + i * golden). No state beyond the counter, so
/// any element can be computed independently of the others.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) noexcept
      : key_(mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd6e8feb86659fd93ULL))) {}

  constexpr std::uint64_t at(std::uint64_t i) const noexcept {
    return mix64(key_ + i * 0x9e3779b97f4a7c15ULL);
  }
  constexpr std::uint64_t next() noexcept { return at(counter_++); }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  /// Unbiased integer in [0, bound) by rejection.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
      const std::uint64_t r = next();
      if (r < limit) return r % bound;
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates, independent of the standard library's distribution code.
template <class T>
void shuffle_in_place(std::span<T> v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace tpsim

#endif  // TPSIM_RNG_HPP
