#ifndef TPSIM_UARCH_TLB_HPP
#define TPSIM_UARCH_TLB_HPP

#include <array>
#include <cstdint>
#include <optional>

#include "tpsim/uarch/cache.hpp"
#include "tpsim/uarch/plru.hpp"
#include "tpsim/uarch/serialize.hpp"

namespace tpsim {

struct TlbEntry {
  bool valid = false;
  std::uint64_t vpn = 0;
  DomainId domain = 0;
  friend constexpr bool operator==(const TlbEntry&, const TlbEntry&) = default;
};

struct TlbAccessResult {
  bool hit = false;
  unsigned slot = 0;
  std::optional<TlbEntry> evicted;
};

/// Fully associative TLB with tree-PLRU replacement.
template <unsigned Entries>
class BasicTlb {
 public:
  static constexpr unsigned kEntries = Entries;

  TlbAccessResult access(std::uint64_t vpn, DomainId domain) {
    TlbAccessResult r;
    for (unsigned i = 0; i < Entries; ++i) {
      if (entries_[i].valid && entries_[i].vpn == vpn && entries_[i].domain == domain) {
        plru_ = plru_touch(plru_, i);
        r.hit = true;
        r.slot = i;
        return r;
      }
    }
    unsigned slot = Entries;
    for (unsigned i = 0; i < Entries; ++i) {
      if (!entries_[i].valid) {
        slot = i;
        break;
      }
    }
    if (slot == Entries) {
      slot = plru_victim(plru_);
      r.evicted = entries_[slot];
    }
    entries_[slot] = TlbEntry{true, vpn, domain};
    plru_ = plru_touch(plru_, slot);
    r.slot = slot;
    return r;
  }

  bool contains(std::uint64_t vpn, DomainId domain) const noexcept {
    for (const TlbEntry& e : entries_)
      if (e.valid && e.vpn == vpn && e.domain == domain) return true;
    return false;
  }

  /// Clears entries; the PLRU tree is separate secondary state.
  void invalidate_all() noexcept { entries_.fill(TlbEntry{}); }
  void reset_plru() noexcept { plru_ = {}; }

  const std::array<TlbEntry, Entries>& entries() const noexcept { return entries_; }
  const PlruTree<Entries>& plru() const noexcept { return plru_; }

  friend void serialize(ByteSink& sink, const BasicTlb& t) {
    for (const TlbEntry& e : t.entries_) {
      sink.put_bool(e.valid);
      sink.put_u64(e.vpn);
      sink.put_u16(e.domain);
    }
    serialize(sink, t.plru_);
  }

  friend bool operator==(const BasicTlb&, const BasicTlb&) = default;

 private:
  std::array<TlbEntry, Entries> entries_{};
  PlruTree<Entries> plru_{};
};

using Tlb = BasicTlb<16>;

}  // namespace tpsim

#endif  // TPSIM_UARCH_TLB_HPP
