#ifndef TPSIM_UARCH_LFSR_HPP
#define TPSIM_UARCH_LFSR_HPP

#include <bit>
#include <cstdint>

#include "tpsim/errors.hpp"
#include "tpsim/uarch/serialize.hpp"

namespace tpsim {

/// 8-bit Fibonacci LFSR, polynomial x^8 + x^6 + x^5 + x^4 + 1 (maximal
/// length, period 255). Drives pseudo-random victim selection in the L1
/// caches. The state is never zero.
class Lfsr8 {
 public:
  static constexpr std::uint8_t kResetSeed = 0x01;

  constexpr Lfsr8() noexcept = default;
  constexpr explicit Lfsr8(std::uint8_t seed) : state_(seed) {
    if (seed == 0) throw ContractViolation("LFSR seed must be nonzero");
  }

  constexpr std::uint8_t state() const noexcept { return state_; }

  friend constexpr bool operator==(Lfsr8, Lfsr8) noexcept = default;

 private:
  std::uint8_t state_ = kResetSeed;
};

struct LfsrStep {
  unsigned victim;  // low bits of the new state, masked to log2(ways)
  Lfsr8 next;
};

/// Advances one step. Feedback is the parity of state bits 7, 5, 4 and 3
/// (taps 8, 6, 5, 4 counted from 1).
constexpr LfsrStep lfsr_next(Lfsr8 lfsr, unsigned ways) {
  const std::uint8_t s = lfsr.state();
  const auto fb = static_cast<std::uint8_t>(((s >> 7) ^ (s >> 5) ^ (s >> 4) ^ (s >> 3)) & 1U);
  const auto n = static_cast<std::uint8_t>((s << 1) | fb);
  const unsigned mask = std::has_single_bit(ways) ? ways - 1 : 0xFFU;
  return {static_cast<unsigned>(n) & mask, Lfsr8(n)};
}

inline void serialize(ByteSink& sink, const Lfsr8& lfsr) { sink.put_u8(lfsr.state()); }

}  // namespace tpsim

#endif  // TPSIM_UARCH_LFSR_HPP
