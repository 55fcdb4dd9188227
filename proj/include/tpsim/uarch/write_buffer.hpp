#ifndef TPSIM_UARCH_WRITE_BUFFER_HPP
#define TPSIM_UARCH_WRITE_BUFFER_HPP

#include <cstdint>
#include <vector>

#include "tpsim/uarch/arbiter.hpp"
#include "tpsim/uarch/serialize.hpp"

namespace tpsim {

struct WriteBufferEntry {
  std::uint64_t addr = 0;
  bool pending = false;
  friend constexpr bool operator==(const WriteBufferEntry&, const WriteBufferEntry&) = default;
};

/// Write buffer of the write-through data cache. Entries are slotted by
/// line number; a lookup arbiter serves load/store lookups and a drain
/// arbiter picks the slot written back next.
class WriteBuffer {
 public:
  static constexpr unsigned kDefaultCapacity = 8;

  WriteBuffer() : WriteBuffer(kDefaultCapacity) {}
  explicit WriteBuffer(unsigned capacity)
      : entries_(capacity), lookup_arb_(capacity), drain_arb_(capacity) {}

  unsigned capacity() const noexcept { return static_cast<unsigned>(entries_.size()); }
  unsigned slot_of(std::uint64_t line_number) const noexcept {
    return static_cast<unsigned>(line_number % entries_.size());
  }

  /// Lookup for a load or store; returns the arbitration delay.
  unsigned lookup(std::uint64_t line_number, bool pinned) {
    return pinned ? 0 : lookup_arb_.grant(slot_of(line_number));
  }

  /// Enqueues a store. A pending entry in the same slot is drained first.
  unsigned push(std::uint64_t addr, std::uint64_t line_number, bool pinned) {
    const unsigned slot = slot_of(line_number);
    unsigned delay = 0;
    if (entries_[slot].pending && !pinned) delay = drain_arb_.grant(slot);
    entries_[slot] = WriteBufferEntry{addr, true};
    return delay;
  }

  /// Drains every pending entry in slot order. Returns how many drained.
  unsigned drain_all(bool pinned = false) {
    unsigned n = 0;
    for (unsigned s = 0; s < capacity(); ++s) {
      if (!entries_[s].pending) continue;
      if (!pinned) drain_arb_.grant(s);
      entries_[s] = WriteBufferEntry{};
      ++n;
    }
    return n;
  }

  unsigned pending_count() const noexcept {
    unsigned n = 0;
    for (const auto& e : entries_) n += e.pending ? 1 : 0;
    return n;
  }

  void reset_arbiters() noexcept {
    lookup_arb_.reset();
    drain_arb_.reset();
  }

  const RoundRobinArbiter& lookup_arbiter() const noexcept { return lookup_arb_; }
  const RoundRobinArbiter& drain_arbiter() const noexcept { return drain_arb_; }
  RoundRobinArbiter& lookup_arbiter() noexcept { return lookup_arb_; }
  const std::vector<WriteBufferEntry>& entries() const noexcept { return entries_; }

  friend void serialize(ByteSink& sink, const WriteBuffer& w) {
    sink.put_u32(w.capacity());
    for (const auto& e : w.entries_) {
      sink.put_u64(e.addr);
      sink.put_bool(e.pending);
    }
    serialize(sink, w.lookup_arb_);
    serialize(sink, w.drain_arb_);
  }
  friend bool operator==(const WriteBuffer&, const WriteBuffer&) = default;

 private:
  std::vector<WriteBufferEntry> entries_;
  RoundRobinArbiter lookup_arb_;
  RoundRobinArbiter drain_arb_;
};

}  // namespace tpsim

#endif  // TPSIM_UARCH_WRITE_BUFFER_HPP
