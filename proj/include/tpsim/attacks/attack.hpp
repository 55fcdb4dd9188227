#ifndef TPSIM_ATTACKS_ATTACK_HPP
#define TPSIM_ATTACKS_ATTACK_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "tpsim/errors.hpp"
#include "tpsim/machine/machine.hpp"

namespace tpsim {

enum class AttackKind : std::uint8_t { l1d, l1i, dtlb, btb, bht, cs_latency };

inline constexpr std::array<AttackKind, 5> kPrimeProbeKinds{
    AttackKind::l1d, AttackKind::l1i, AttackKind::dtlb, AttackKind::btb, AttackKind::bht};

inline std::string_view to_string(AttackKind k) noexcept {
  switch (k) {
    case AttackKind::l1d: return "l1d";
    case AttackKind::l1i: return "l1i";
    case AttackKind::dtlb: return "dtlb";
    case AttackKind::btb: return "btb";
    case AttackKind::bht: return "bht";
    case AttackKind::cs_latency: return "cs_latency";
  }
  return "l1d";
}

inline std::optional<AttackKind> parse_attack_kind(std::string_view s) noexcept {
  for (AttackKind k : {AttackKind::l1d, AttackKind::l1i, AttackKind::dtlb, AttackKind::btb,
                       AttackKind::bht, AttackKind::cs_latency})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// Number of distinct secrets the kind can encode on `cfg`.
inline std::uint32_t secret_range(AttackKind k, const MicroArchConfig& cfg) noexcept {
  switch (k) {
    case AttackKind::l1d: return cfg.l1d.lines();
    case AttackKind::l1i: return cfg.l1i.lines();
    case AttackKind::dtlb: return Tlb::kEntries;
    case AttackKind::btb: return Btb::kEntries;
    case AttackKind::bht: return Bht::kEntries;
    case AttackKind::cs_latency: return 256;
  }
  return 1;
}

struct AttackSpec {
  AttackKind kind = AttackKind::l1d;
  FenceVariant mitigation{Mitigation::microreset};
  Cycles pad = 0;
  /// Fixed Trojan time slice of the context-switch attack.
  Cycles slice_cycles = 400'000;
};

// Offsets inside a domain's region. Kept page aligned so every buffer
// starts at cache set 0.
namespace layout {
inline constexpr std::uint64_t kDataBuffer = 0x0000'0000;
inline constexpr std::uint64_t kInstrBuffer = 0x1000'0000;
inline constexpr std::uint64_t kPageBuffer = 0x2000'0000;
inline constexpr std::uint64_t kJumpTable = 0x3000'0000;
inline constexpr std::uint64_t kJumpTargets = 0x3000'1000;
inline constexpr std::uint64_t kBranchTable = 0x3001'0000;
inline constexpr std::uint64_t kFillerCode = 0x3002'0000;
inline constexpr std::uint64_t kTrojanWindows = 0x4000'0000;
inline constexpr std::uint64_t kWindowStride = 0x1'0000;  // 64 KiB: room for 16 pages
inline constexpr std::uint64_t kWindowCount = 1U << 14;
inline constexpr unsigned kCsFillerOps = 4096;
}  // namespace layout

/// Page-aligned offset of the Trojan's buffer for one iteration. Fresh
/// windows keep the Trojan's own lines cold, so every touch displaces
/// spy state.
constexpr std::uint64_t trojan_window(std::uint64_t seed) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return (z % layout::kWindowCount) * layout::kWindowStride;
}

/// Spy traversal touching every (set, way) or slot exactly once, in
/// ascending order. The probe is the same traversal.
inline Workload gen_prime(AttackKind kind, const MicroArchConfig& cfg) {
  Workload ops;
  const std::uint64_t base = region_base(kSpyDomain);
  switch (kind) {
    case AttackKind::l1d:
    case AttackKind::cs_latency:
      for (std::uint64_t i = 0; i < cfg.l1d.lines(); ++i)
        ops.emplace_back(Read{base + layout::kDataBuffer + i * cfg.l1d.line_bytes});
      break;
    case AttackKind::l1i:
      for (std::uint64_t i = 0; i < cfg.l1i.lines(); ++i)
        ops.emplace_back(FetchAt{base + layout::kInstrBuffer + i * cfg.l1i.line_bytes});
      break;
    case AttackKind::dtlb:
      // Page p reads line p of its page, so the 16 reads use distinct L1D sets.
      for (std::uint64_t p = 0; p < Tlb::kEntries; ++p)
        ops.emplace_back(Read{base + layout::kPageBuffer + p * kPageBytes + p * cfg.l1d.line_bytes});
      break;
    case AttackKind::btb:
      for (std::uint64_t j = 0; j < Btb::kEntries; ++j)
        ops.emplace_back(IndirectJump{base + layout::kJumpTable + 4 * j,
                                      base + layout::kJumpTargets + 4 * j});
      break;
    case AttackKind::bht:
      for (std::uint64_t j = 0; j < Bht::kEntries; ++j)
        ops.emplace_back(CondBranch{base + layout::kBranchTable + 4 * j, true});
      break;
  }
  return ops;
}

inline Workload gen_probe(AttackKind kind, const MicroArchConfig& cfg) { return gen_prime(kind, cfg); }

/// Dirty lines the context-switch Trojan writes for `secret`; the top
/// secret dirties the whole L1D.
constexpr std::uint64_t cs_dirty_lines(std::uint32_t secret, std::uint32_t total_lines) noexcept {
  return std::uint64_t{secret} * total_lines / 255;
}

/// Trojan encoding of `secret`. `window` is a page-aligned offset from
/// trojan_window() and only moves the data and instruction buffers.
inline Workload gen_trojan(AttackKind kind, const MicroArchConfig& cfg, std::uint32_t secret,
                           std::uint64_t window = 0) {
  if (secret >= secret_range(kind, cfg)) throw ContractViolation("gen_trojan: secret out of range");
  if (window % kPageBytes) throw ContractViolation("gen_trojan: window must be page aligned");
  Workload ops;
  const std::uint64_t base = region_base(kTrojanDomain);
  const std::uint64_t win = base + layout::kTrojanWindows + window;
  switch (kind) {
    case AttackKind::l1d:
      for (std::uint64_t i = 0; i < secret; ++i) ops.emplace_back(Read{win + i * cfg.l1d.line_bytes});
      break;
    case AttackKind::l1i:
      for (std::uint64_t i = 0; i < secret; ++i)
        ops.emplace_back(FetchAt{win + layout::kInstrBuffer + i * cfg.l1i.line_bytes});
      break;
    case AttackKind::dtlb:
      // Lines sit in sets the spy's page walk does not use.
      for (std::uint64_t p = 0; p < secret; ++p)
        ops.emplace_back(Read{win + p * kPageBytes + (Tlb::kEntries + p) * cfg.l1d.line_bytes});
      break;
    case AttackKind::btb:
      // Same slots as the spy's jumps, different tags and targets.
      for (std::uint64_t j = 0; j < secret; ++j)
        ops.emplace_back(IndirectJump{base + layout::kJumpTable + 4 * j,
                                      base + layout::kJumpTargets + 4 * j});
      break;
    case AttackKind::bht:
      // Two not-taken branches walk a saturated counter down to
      // weakly-not-taken.
      for (std::uint64_t j = 0; j < secret; ++j) {
        ops.emplace_back(CondBranch{base + layout::kBranchTable + 4 * j, false});
        ops.emplace_back(CondBranch{base + layout::kBranchTable + 4 * j, false});
      }
      break;
    case AttackKind::cs_latency: {
      for (std::uint64_t i = 0; i < layout::kCsFillerOps; ++i)
        ops.emplace_back(CondBranch{base + layout::kFillerCode + 4 * (i % Bht::kEntries), true});
      const std::uint64_t lines = cs_dirty_lines(secret, cfg.l1d.lines());
      for (std::uint64_t i = 0; i < lines; ++i) ops.emplace_back(Write{win + i * cfg.l1d.line_bytes});
      break;
    }
  }
  return ops;
}

/// Select mask for the software-priming mitigation; empty for components
/// software cannot prime.
constexpr std::uint32_t sw_prime_mask(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::l1d: return kMaskL1D;
    case AttackKind::l1i: return kMaskL1I;
    default: return 0;
  }
}

constexpr bool sw_applicable(AttackKind kind) noexcept { return sw_prime_mask(kind) != 0; }

inline Workload gen_sw_mitigation(AttackKind kind, const MicroArchConfig& cfg, unsigned rounds) {
  return kernel_prime_ops(cfg, sw_prime_mask(kind), rounds);
}

/// Mitigation as issued on the switch: software priming gets the mask of
/// the attacked cache.
inline FenceVariant effective_variant(const AttackSpec& spec) {
  FenceVariant v = spec.mitigation;
  if (v.kind == Mitigation::sw_prime) v.select_mask = sw_prime_mask(spec.kind);
  return v;
}

/// Prime, switch to the Trojan, encode, switch back, probe. Returns the
/// probe time.
inline Cycles run_pp_iteration(Machine& m, const AttackSpec& spec, std::uint32_t secret,
                               std::uint64_t seed, const Workload* prime = nullptr) {
  if (spec.kind == AttackKind::cs_latency)
    throw ContractViolation("run_pp_iteration: use run_cs_iteration for cs_latency");
  const MicroArchConfig& cfg = m.config();
  const Workload trojan = gen_trojan(spec.kind, cfg, secret, trojan_window(seed));
  Workload own;
  if (!prime) {
    own = gen_prime(spec.kind, cfg);
    prime = &own;
  }
  const FenceVariant v = effective_variant(spec);
  m.set_pad(spec.pad);
  if (m.current_domain() != kSpyDomain) m.context_switch(v, kSpyDomain);
  m.run_sequence(*prime, kSpyDomain);
  m.context_switch(v, kTrojanDomain);
  m.run_sequence(trojan, kTrojanDomain);
  m.context_switch(v, kSpyDomain);
  return m.run_sequence(*prime, kSpyDomain);
}

/// Spy yields, the Trojan runs a fixed slice that dirties lines, the
/// timer preempts it at the slice end. Returns how long the spy was off
/// the core.
inline Cycles run_cs_iteration(Machine& m, const AttackSpec& spec, std::uint32_t secret,
                               std::uint64_t seed) {
  const MicroArchConfig& cfg = m.config();
  if (secret >= secret_range(AttackKind::cs_latency, cfg))
    throw ContractViolation("run_cs_iteration: secret out of range");
  const Workload trojan = gen_trojan(AttackKind::cs_latency, cfg, secret, trojan_window(seed));
  AttackSpec cs = spec;
  cs.kind = AttackKind::cs_latency;
  const FenceVariant v = effective_variant(cs);
  m.set_pad(spec.pad);
  if (m.current_domain() != kSpyDomain) m.context_switch(v, kSpyDomain);
  const Cycles t0 = m.cycle();
  m.context_switch(v, kTrojanDomain);
  const Cycles slice_end = m.cycle() + spec.slice_cycles;
  m.run_sequence(trojan, kTrojanDomain);
  if (m.cycle() > slice_end) throw ContractViolation("run_cs_iteration: Trojan overran its slice");
  m.idle_until(slice_end);
  m.context_switch(v, kSpyDomain, {slice_end});
  return m.cycle() - t0;
}

}  // namespace tpsim

#endif  // TPSIM_ATTACKS_ATTACK_HPP
