#ifndef TPSIM_UARCH_PREDICTOR_HPP
#define TPSIM_UARCH_PREDICTOR_HPP

#include <array>
#include <cstdint>

#include "tpsim/uarch/serialize.hpp"

namespace tpsim {

// Branch pcs are byte addresses of 4-byte instructions; both tables index
// on the instruction number (pc >> 2).
constexpr std::uint64_t instruction_index(std::uint64_t pc) noexcept { return pc >> 2; }

/// Table of 2-bit saturating counters, reset to 1 (weakly not-taken).
template <unsigned Entries>
class BasicBht {
 public:
  static constexpr unsigned kEntries = Entries;
  static constexpr std::uint8_t kResetCounter = 1;

  BasicBht() { reset(); }

  static constexpr unsigned index_of(std::uint64_t pc) noexcept {
    return static_cast<unsigned>(instruction_index(pc) % Entries);
  }

  /// Returns true on a mispredict.
  bool access(std::uint64_t pc, bool taken) noexcept {
    std::uint8_t& c = counters_[index_of(pc)];
    const bool predicted_taken = c >= 2;
    if (taken && c < 3) ++c;
    if (!taken && c > 0) --c;
    return predicted_taken != taken;
  }

  void reset() noexcept { counters_.fill(kResetCounter); }

  std::uint8_t counter(unsigned i) const { return counters_.at(i); }
  const std::array<std::uint8_t, Entries>& counters() const noexcept { return counters_; }

  friend void serialize(ByteSink& sink, const BasicBht& b) {
    for (std::uint8_t c : b.counters_) sink.put_u8(c);
  }
  friend bool operator==(const BasicBht&, const BasicBht&) = default;

 private:
  std::array<std::uint8_t, Entries> counters_{};
};

struct BtbEntry {
  bool valid = false;
  std::uint64_t tag = 0;
  std::uint64_t target = 0;
  friend constexpr bool operator==(const BtbEntry&, const BtbEntry&) = default;
};

/// Direct-mapped branch target buffer.
template <unsigned Entries>
class BasicBtb {
 public:
  static constexpr unsigned kEntries = Entries;

  static constexpr unsigned slot_of(std::uint64_t pc) noexcept {
    return static_cast<unsigned>(instruction_index(pc) % Entries);
  }

  /// Returns true on a mispredict; the slot is (re)installed either way.
  bool access(std::uint64_t pc, std::uint64_t target) noexcept {
    BtbEntry& e = entries_[slot_of(pc)];
    const bool predicted = e.valid && e.tag == pc && e.target == target;
    e = BtbEntry{true, pc, target};
    return !predicted;
  }

  void reset() noexcept { entries_.fill(BtbEntry{}); }

  unsigned valid_count() const noexcept {
    unsigned n = 0;
    for (const BtbEntry& e : entries_) n += e.valid ? 1 : 0;
    return n;
  }
  const std::array<BtbEntry, Entries>& entries() const noexcept { return entries_; }

  friend void serialize(ByteSink& sink, const BasicBtb& b) {
    for (const BtbEntry& e : b.entries_) {
      sink.put_bool(e.valid);
      sink.put_u64(e.tag);
      sink.put_u64(e.target);
    }
  }
  friend bool operator==(const BasicBtb&, const BasicBtb&) = default;

 private:
  std::array<BtbEntry, Entries> entries_{};
};

using Bht = BasicBht<64>;
using Btb = BasicBtb<16>;

}  // namespace tpsim

#endif  // TPSIM_UARCH_PREDICTOR_HPP
