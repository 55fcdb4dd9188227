#ifndef TPSIM_UARCH_CACHE_HPP
#define TPSIM_UARCH_CACHE_HPP

#include <bit>
#include <cstdint>
#include <optional>
#include <vector>

#include "tpsim/errors.hpp"
#include "tpsim/uarch/lfsr.hpp"
#include "tpsim/uarch/serialize.hpp"

namespace tpsim {

using DomainId = std::uint16_t;

enum class WritePolicy : std::uint8_t { write_through, write_back };

struct CacheGeometry {
  unsigned sets = 256;
  unsigned ways = 8;
  unsigned line_bytes = 16;

  constexpr std::uint64_t capacity_bytes() const noexcept {
    return std::uint64_t{sets} * ways * line_bytes;
  }
  constexpr unsigned lines() const noexcept { return sets * ways; }
  friend constexpr bool operator==(const CacheGeometry&, const CacheGeometry&) = default;
};

struct CacheLine {
  std::uint64_t tag = 0;
  DomainId domain = 0;
  bool valid = false;
  bool dirty = false;

  friend constexpr bool operator==(const CacheLine&, const CacheLine&) = default;
};

struct CacheSlot {
  unsigned set;
  unsigned way;
  friend constexpr bool operator==(const CacheSlot&, const CacheSlot&) = default;
};

struct CacheAccessResult {
  bool hit = false;
  bool victim_dirty_writeback = false;
  std::optional<CacheSlot> evicted;  // set when a valid line was displaced
  std::optional<DomainId> evicted_domain;
  CacheSlot slot{};                  // where the accessed line now lives
};

/// Set-associative cache holding tags and metadata only. Replacement uses
/// the first invalid way of the set, else the way named by the LFSR; the
/// LFSR steps on every miss either way.
class SetAssocCache {
 public:
  SetAssocCache() : SetAssocCache(CacheGeometry{}, WritePolicy::write_through) {}

  SetAssocCache(CacheGeometry geometry, WritePolicy policy)
      : geo_(geometry), policy_(policy), lines_(geometry.lines()) {
    if (!std::has_single_bit(geo_.sets) || !std::has_single_bit(geo_.ways) ||
        !std::has_single_bit(geo_.line_bytes))
      throw ContractViolation("cache geometry must use powers of two");
    if (geo_.ways > 256) throw ContractViolation("cache ways exceed LFSR range");
    line_shift_ = static_cast<unsigned>(std::countr_zero(geo_.line_bytes));
    set_shift_ = static_cast<unsigned>(std::countr_zero(geo_.sets));
  }

  const CacheGeometry& geometry() const noexcept { return geo_; }
  WritePolicy policy() const noexcept { return policy_; }
  Lfsr8 lfsr() const noexcept { return lfsr_; }
  void set_lfsr(Lfsr8 l) noexcept { lfsr_ = l; }

  std::uint64_t line_number(std::uint64_t addr) const noexcept { return addr >> line_shift_; }
  unsigned set_index(std::uint64_t addr) const noexcept {
    return static_cast<unsigned>(line_number(addr) & (geo_.sets - 1));
  }
  std::uint64_t tag_of(std::uint64_t addr) const noexcept { return line_number(addr) >> set_shift_; }

  const CacheLine& line(unsigned set, unsigned way) const { return lines_.at(index(set, way)); }
  CacheLine& line(unsigned set, unsigned way) { return lines_.at(index(set, way)); }

  /// Presence check without side effects.
  bool contains(std::uint64_t addr) const noexcept { return find(addr).has_value(); }

  /// `freeze_lfsr` holds the LFSR still (pinned-secondary mode).
  CacheAccessResult access(std::uint64_t addr, bool is_write, DomainId domain,
                           bool freeze_lfsr = false) {
    CacheAccessResult r;
    const unsigned set = set_index(addr);
    const std::uint64_t tag = tag_of(addr);
    CacheLine* base = &lines_[index(set, 0)];
    for (unsigned w = 0; w < geo_.ways; ++w) {
      if (base[w].valid && base[w].tag == tag) {
        if (is_write && policy_ == WritePolicy::write_back) base[w].dirty = true;
        r.hit = true;
        r.slot = {set, w};
        return r;
      }
    }

    std::optional<unsigned> invalid;
    for (unsigned w = 0; w < geo_.ways; ++w) {
      if (!base[w].valid) {
        invalid = w;
        break;
      }
    }
    unsigned victim;
    if (freeze_lfsr) {
      victim = lfsr_.state() & (geo_.ways - 1);
    } else {
      const LfsrStep step = lfsr_next(lfsr_, geo_.ways);
      lfsr_ = step.next;
      victim = step.victim;
    }
    if (invalid) victim = *invalid;

    CacheLine& v = base[victim];
    if (v.valid) {
      r.evicted = CacheSlot{set, victim};
      r.evicted_domain = v.domain;
      r.victim_dirty_writeback = v.dirty;
    }
    v = CacheLine{tag, domain, true, is_write && policy_ == WritePolicy::write_back};
    r.slot = {set, victim};
    return r;
  }

  /// Counts dirty lines, then leaves every line clean and invalid.
  unsigned writeback_all() noexcept {
    unsigned dirty = dirty_count();
    invalidate_all();
    return dirty;
  }

  void invalidate_all() noexcept {
    for (CacheLine& l : lines_) l = CacheLine{};
  }

  unsigned dirty_count() const noexcept {
    unsigned n = 0;
    for (const CacheLine& l : lines_) n += l.dirty ? 1 : 0;
    return n;
  }

  unsigned valid_in_set(unsigned set) const {
    unsigned n = 0;
    for (unsigned w = 0; w < geo_.ways; ++w) n += line(set, w).valid ? 1 : 0;
    return n;
  }

  friend void serialize(ByteSink& sink, const SetAssocCache& c) {
    sink.put_u32(c.geo_.sets);
    sink.put_u32(c.geo_.ways);
    sink.put_u32(c.geo_.line_bytes);
    sink.put_u8(static_cast<std::uint8_t>(c.policy_));
    for (const CacheLine& l : c.lines_) {
      sink.put_bool(l.valid);
      sink.put_bool(l.dirty);
      sink.put_u64(l.tag);
      sink.put_u16(l.domain);
    }
    serialize(sink, c.lfsr_);
  }

  friend bool operator==(const SetAssocCache& a, const SetAssocCache& b) {
    return a.geo_ == b.geo_ && a.policy_ == b.policy_ && a.lines_ == b.lines_ && a.lfsr_ == b.lfsr_;
  }

 private:
  std::size_t index(unsigned set, unsigned way) const noexcept {
    return static_cast<std::size_t>(set) * geo_.ways + way;
  }

  std::optional<unsigned> find(std::uint64_t addr) const noexcept {
    const unsigned set = set_index(addr);
    const std::uint64_t tag = tag_of(addr);
    for (unsigned w = 0; w < geo_.ways; ++w) {
      const CacheLine& l = lines_[index(set, w)];
      if (l.valid && l.tag == tag) return w;
    }
    return std::nullopt;
  }

  CacheGeometry geo_;
  WritePolicy policy_;
  std::vector<CacheLine> lines_;
  Lfsr8 lfsr_{};
  unsigned line_shift_ = 4;
  unsigned set_shift_ = 8;
};

/// Free-function form of the write-back sweep.
inline unsigned cache_writeback_all(SetAssocCache& cache) noexcept { return cache.writeback_all(); }

}  // namespace tpsim

#endif  // TPSIM_UARCH_CACHE_HPP
