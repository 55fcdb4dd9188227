#ifndef TPSIM_MACHINE_MACHINE_HPP
#define TPSIM_MACHINE_MACHINE_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "tpsim/errors.hpp"
#include "tpsim/machine/config.hpp"
#include "tpsim/machine/state.hpp"
#include "tpsim/machine/workload.hpp"

namespace tpsim {

enum class Mitigation : std::uint8_t { none, sw_prime, basic_flush, full_flush, microreset };

inline constexpr std::uint32_t kMaskL1D = 1U << 0;
inline constexpr std::uint32_t kMaskL1I = 1U << 1;
inline constexpr std::uint32_t kMaskTlbs = 1U << 2;
inline constexpr std::uint32_t kMaskPredictors = 1U << 3;
inline constexpr std::uint32_t kMaskSecondary = 1U << 4;
inline constexpr std::uint32_t kMaskAll = 0x1F;
inline constexpr unsigned kMaskWidth = 20;

inline std::string_view to_string(Mitigation m) noexcept {
  switch (m) {
    case Mitigation::none: return "none";
    case Mitigation::sw_prime: return "sw";
    case Mitigation::basic_flush: return "basic_flush";
    case Mitigation::full_flush: return "full_flush";
    case Mitigation::microreset: return "microreset";
  }
  return "none";
}

inline std::optional<Mitigation> parse_mitigation(std::string_view s) noexcept {
  for (Mitigation m : {Mitigation::none, Mitigation::sw_prime, Mitigation::basic_flush,
                       Mitigation::full_flush, Mitigation::microreset})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

constexpr bool is_fence_t(Mitigation m) noexcept {
  return m == Mitigation::basic_flush || m == Mitigation::full_flush ||
         m == Mitigation::microreset;
}

/// For sw_prime, mask bits 0/1 pick which L1 caches the kernel primes and
/// `sw_rounds` is the number of traversals.
struct FenceVariant {
  Mitigation kind = Mitigation::none;
  std::uint32_t select_mask = kMaskAll;
  unsigned sw_rounds = 1;
};

inline void validate_mask(std::uint32_t mask) {
  if (mask >> kMaskWidth) throw InvalidMask(mask);
  if (mask & ~kMaskAll) throw InvalidMask(mask);
}

enum class MicroresetStep : unsigned { save_pc, writeback, drain, clear_arrays, assert_reset, resume };
inline constexpr std::size_t kMicroresetSteps = 6;

struct FenceResult {
  Cycles fence_cycles = 0;
  unsigned writebacks = 0;
  std::array<Cycles, kMicroresetSteps> microreset_steps{};
};

struct KernelBreakdown {
  Cycles clint_reconfig = 0;
  Cycles schedule = 0;
  Cycles thread_switch = 0;
  unsigned missed_lines = 0;
};

struct CsReport {
  Cycles interrupt_cycle = 0;
  Cycles total_cycles = 0;
  Cycles kernel_cycles = 0;
  Cycles fence_cycles = 0;
  Cycles pad_stall = 0;
  unsigned writebacks = 0;
  bool padded = false;
  KernelBreakdown kernel{};
  std::array<Cycles, kMicroresetSteps> microreset_steps{};
};

struct CsOptions {
  /// Timer-interrupt instant; defaults to the cycle the switch starts.
  std::optional<Cycles> interrupt_cycle;
};

/// Fixed kernel working set. D-lines occupy the top quarter of L1D sets
/// and I-lines the top eighth of L1I sets, so low sets never hold kernel
/// data.
struct KernelLayout {
  static constexpr unsigned kDataLines = 64;
  static constexpr unsigned kInstrLines = 32;
  static constexpr std::array<unsigned, 3> kDataSplit{24, 24, 16};
  static constexpr std::array<unsigned, 3> kInstrSplit{12, 12, 8};
  static constexpr std::uint64_t kInstrOffset = 0x1000'0000;
  static constexpr std::uint64_t kFlushDataOffset = 0x2000'0000;
  static constexpr std::uint64_t kFlushInstrOffset = 0x3000'0000;

  std::vector<std::uint64_t> data;
  std::vector<std::uint64_t> instr;

  explicit KernelLayout(const MicroArchConfig& cfg) {
    const std::uint64_t base = region_base(kKernelDomain);
    const unsigned d_first = cfg.l1d.sets - std::min(cfg.l1d.sets, kDataLines);
    for (unsigned i = 0; i < kDataLines; ++i)
      data.push_back(base + std::uint64_t{d_first + i} * cfg.l1d.line_bytes);
    const unsigned i_first = cfg.l1i.sets - std::min(cfg.l1i.sets, kInstrLines);
    for (unsigned i = 0; i < kInstrLines; ++i)
      instr.push_back(base + kInstrOffset + std::uint64_t{i_first + i} * cfg.l1i.line_bytes);
  }
};

/// Kernel-issued priming traversal of the selected L1 caches.
inline Workload kernel_prime_ops(const MicroArchConfig& cfg, std::uint32_t mask, unsigned rounds) {
  if (rounds == 0) throw ContractViolation("sw prime needs rounds >= 1");
  Workload ops;
  const std::uint64_t base = region_base(kKernelDomain);
  for (unsigned r = 0; r < rounds; ++r) {
    if (mask & kMaskL1D)
      for (std::uint64_t i = 0; i < cfg.l1d.lines(); ++i)
        ops.emplace_back(Read{base + KernelLayout::kFlushDataOffset + i * cfg.l1d.line_bytes});
    if (mask & kMaskL1I)
      for (std::uint64_t i = 0; i < cfg.l1i.lines(); ++i)
        ops.emplace_back(FetchAt{base + KernelLayout::kFlushInstrOffset + i * cfg.l1i.line_bytes});
  }
  return ops;
}

class Machine {
 public:
  explicit Machine(MicroArchConfig cfg, DomainId initial = kSpyDomain)
      : cfg_(std::move(cfg)),
        fresh_(MicroState::reset(cfg_)),
        state_(fresh_),
        layout_(cfg_),
        domain_(initial) {}

  const MicroArchConfig& config() const noexcept { return cfg_; }
  const MicroState& state() const noexcept { return state_; }
  MicroState& state() noexcept { return state_; }
  const MicroState& fresh_state() const noexcept { return fresh_; }
  const KernelLayout& kernel_layout() const noexcept { return layout_; }
  DomainId current_domain() const noexcept { return domain_; }
  void set_current_domain(DomainId d) noexcept { domain_ = d; }
  Cycles cycle() const noexcept { return state_.cycle_counter; }
  void set_pad(Cycles pad) {
    if (pad > 0xFFFF'FFFFULL) throw ContractViolation("pad_ctrl is a 32-bit register");
    state_.pad_ctrl = pad;
  }
  Cycles pad() const noexcept { return state_.pad_ctrl; }

  /// Advances time without touching micro-architectural state.
  void idle_until(Cycles c) {
    if (c > state_.cycle_counter) state_.cycle_counter = c;
  }

  Cycles exec_op(const WorkloadOp& op, DomainId domain) {
    if (domain != domain_) throw ContractViolation("exec_op: domain is not the running domain");
    const Cycles cost = std::visit([&](const auto& o) { return exec(o, domain); }, op);
    state_.pipeline_occupancy = std::min<std::uint32_t>(state_.pipeline_occupancy + 1, kPipelineDepth);
    state_.cycle_counter += cost;
    return cost;
  }

  Cycles run_sequence(std::span<const WorkloadOp> ops, DomainId domain) {
    Cycles total = 0;
    for (const WorkloadOp& op : ops) total += exec_op(op, domain);
    return total;
  }

  CsReport context_switch(const FenceVariant& variant, DomainId next_domain,
                          const CsOptions& opts = {}) {
    validate_mask(variant.select_mask);
    CsReport rep;
    const Cycles start = state_.cycle_counter;
    rep.interrupt_cycle = opts.interrupt_cycle.value_or(start);
    if (rep.interrupt_cycle > start)
      throw ContractViolation("context_switch: interrupt lies in the future");

    const DomainId outgoing = domain_;
    domain_ = kKernelDomain;
    rep.kernel = kernel_routine();
    rep.kernel_cycles = rep.kernel.clint_reconfig + rep.kernel.schedule + rep.kernel.thread_switch;
    state_.cycle_counter += rep.kernel_cycles;

    try {
      if (variant.kind == Mitigation::sw_prime) {
        const Workload ops = kernel_prime_ops(cfg_, variant.select_mask, variant.sw_rounds);
        rep.fence_cycles = run_sequence(ops, kKernelDomain);
      } else if (is_fence_t(variant.kind)) {
        const FenceResult f = apply_fence_t(variant);
        rep.fence_cycles = f.fence_cycles;
        rep.writebacks = f.writebacks;
        rep.microreset_steps = f.microreset_steps;
        if (state_.pad_ctrl > 0) {
          rep.pad_stall = pad_until(rep.interrupt_cycle, state_.pad_ctrl);
          rep.padded = true;
        }
      }
    } catch (...) {
      domain_ = outgoing;
      throw;
    }
    domain_ = next_domain;
    rep.total_cycles = state_.cycle_counter - start;
    return rep;
  }

  FenceResult apply_fence_t(const FenceVariant& variant) {
    validate_mask(variant.select_mask);
    FenceResult r;
    switch (variant.kind) {
      case Mitigation::basic_flush:
        r = basic_flush(variant.select_mask);
        break;
      case Mitigation::full_flush:
        r = basic_flush(variant.select_mask);
        full_flush_secondary(variant.select_mask);
        break;
      case Mitigation::microreset:
        r = microreset();
        break;
      default:
        throw ContractViolation("apply_fence_t: variant is not a fence.t flavour");
    }
    state_.cycle_counter += r.fence_cycles;
    return r;
  }

  /// Returns the stall inserted.
  Cycles pad_until(Cycles interrupt_cycle, Cycles pad) {
    if (state_.cycle_counter < interrupt_cycle)
      throw ContractViolation("pad_until: cycle counter precedes the interrupt");
    if (pad == 0) return 0;
    const Cycles elapsed = state_.cycle_counter - interrupt_cycle;
    if (elapsed > pad) throw PadExceeded(elapsed - pad);
    state_.cycle_counter = interrupt_cycle + pad;
    return pad - elapsed;
  }

 private:
  bool pinned() const noexcept { return cfg_.pin_secondary; }

  unsigned grant(RoundRobinArbiter& arb, unsigned unit) { return pinned() ? 0 : arb.grant(unit); }

  void check_region(DomainId domain, std::uint64_t addr) const {
    if (!in_region(domain, addr)) throw ContractViolation("address outside the domain's region");
  }

  // A request that survived a fence completes ahead of the next data
  // access. It re-arbitrates but never installs a line.
  void replay_stale_miss() {
    if (!state_.miss_handler.stale()) return;
    const auto req = state_.miss_handler.take();
    grant(state_.mem_arbiter, req->is_store ? kArbStore : kArbLoad);
    if (cfg_.l1d_policy == WritePolicy::write_through)
      state_.write_buffer.lookup(state_.l1d.line_number(req->addr), pinned());
  }

  Cycles data_access(std::uint64_t addr, bool is_write, DomainId domain) {
    check_region(domain, addr);
    replay_stale_miss();
    const Latencies& lat = cfg_.lat;
    Cycles cost = 0;
    if (!state_.dtlb.access(addr / kPageBytes, domain).hit)
      cost += lat.t_tlb_miss + grant(state_.mem_arbiter, kArbMmu);
    cost += grant(state_.mem_arbiter, is_write ? kArbStore : kArbLoad);
    const std::uint64_t line = state_.l1d.line_number(addr);
    const bool write_through = cfg_.l1d_policy == WritePolicy::write_through;
    if (write_through) cost += state_.write_buffer.lookup(line, pinned());
    const CacheAccessResult res = state_.l1d.access(addr, is_write, domain, pinned());
    cost += res.hit ? lat.t_hit : lat.t_miss;
    if (res.victim_dirty_writeback) cost += lat.t_wb_per_line;
    if (!res.hit && cfg_.miss_handler_trace_enabled())
      state_.miss_handler.record({addr, state_.cycle_counter, is_write});
    if (write_through && is_write) cost += state_.write_buffer.push(addr, line, pinned());
    return cost;
  }

  Cycles exec(const Read& op, DomainId d) { return data_access(op.addr, false, d); }
  Cycles exec(const Write& op, DomainId d) { return data_access(op.addr, true, d); }
  Cycles exec(const CondBranch& op, DomainId d) {
    check_region(d, op.pc);
    return 1 + (state_.bht.access(op.pc, op.taken) ? cfg_.lat.t_mispredict : 0);
  }
  Cycles exec(const IndirectJump& op, DomainId d) {
    check_region(d, op.pc);
    check_region(d, op.target);
    return 1 + (state_.btb.access(op.pc, op.target) ? cfg_.lat.t_mispredict : 0);
  }
  Cycles exec(const FetchAt& op, DomainId d) {
    check_region(d, op.pc);
    Cycles cost = 0;
    if (!state_.itlb.access(op.pc / kPageBytes, d).hit)
      cost += cfg_.lat.t_tlb_miss + grant(state_.mem_arbiter, kArbMmu);
    cost += state_.l1i.access(op.pc, false, d, pinned()).hit ? cfg_.lat.t_hit : cfg_.lat.t_miss;
    return cost;
  }

  // Kernel lines bypass TLBs, predictors and arbiters: only their cache
  // residency is modelled.
  KernelBreakdown kernel_routine() {
    KernelBreakdown k;
    std::array<Cycles*, 3> slots{&k.clint_reconfig, &k.schedule, &k.thread_switch};
    const std::array<Cycles, 3> base{cfg_.kernel.clint_reconfig, cfg_.kernel.schedule,
                                     cfg_.kernel.thread_switch};
    std::size_t di = 0, ii = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      Cycles cost = base[c];
      for (unsigned n = 0; n < KernelLayout::kDataSplit[c]; ++n, ++di) {
        const CacheAccessResult r = state_.l1d.access(layout_.data[di], false, kKernelDomain, pinned());
        if (r.hit) continue;
        ++k.missed_lines;
        cost += cfg_.lat.t_miss + (r.victim_dirty_writeback ? cfg_.lat.t_wb_per_line : 0);
      }
      for (unsigned n = 0; n < KernelLayout::kInstrSplit[c]; ++n, ++ii) {
        if (state_.l1i.access(layout_.instr[ii], false, kKernelDomain, pinned()).hit) continue;
        ++k.missed_lines;
        cost += cfg_.lat.t_miss;
      }
      *slots[c] = cost;
    }
    return k;
  }

  Cycles clear_cost(std::uint32_t mask) const noexcept {
    unsigned sets = 0;
    if (mask & kMaskL1D) sets = std::max(sets, cfg_.l1d.sets);
    if (mask & kMaskL1I) sets = std::max(sets, cfg_.l1i.sets);
    return sets;
  }

  FenceResult basic_flush(std::uint32_t mask) {
    FenceResult r;
    if (mask & kMaskL1D) {
      r.writebacks = state_.l1d.writeback_all();
      r.fence_cycles += Cycles{r.writebacks} * cfg_.lat.t_wb_per_line;
      state_.write_buffer.drain_all(pinned());
      r.fence_cycles += cfg_.lat.t_fence_drain;
    }
    if (mask & kMaskL1I) state_.l1i.invalidate_all();
    if (mask & kMaskTlbs) {
      state_.dtlb.invalidate_all();
      state_.itlb.invalidate_all();
    }
    if (mask & kMaskPredictors) {
      state_.bht.reset();
      state_.btb.reset();
    }
    r.fence_cycles += clear_cost(mask) + cfg_.lat.t_pipeline_flush;
    state_.pipeline_occupancy = 0;
    state_.miss_handler.mark_stale();
    return r;
  }

  void full_flush_secondary(std::uint32_t mask) {
    if (!(mask & kMaskSecondary)) return;
    state_.l1d.set_lfsr(Lfsr8{});
    state_.l1i.set_lfsr(Lfsr8{});
    state_.dtlb.reset_plru();
    state_.itlb.reset_plru();
    state_.mem_arbiter.reset();
    state_.write_buffer.reset_arbiters();
    if (!cfg_.miss_handler_trace_enabled()) state_.miss_handler.clear();
  }

  FenceResult microreset() {
    FenceResult r;
    auto step = [&](MicroresetStep s, Cycles c) {
      r.microreset_steps[static_cast<std::size_t>(s)] = c;
      r.fence_cycles += c;
    };
    const std::uint64_t resume_pc = state_.saved_pc;
    step(MicroresetStep::save_pc, 0);

    r.writebacks = cfg_.l1d_policy == WritePolicy::write_back ? state_.l1d.writeback_all() : 0;
    step(MicroresetStep::writeback, Cycles{r.writebacks} * cfg_.lat.t_wb_per_line);

    state_.write_buffer.drain_all(pinned());
    state_.miss_handler.clear();
    step(MicroresetStep::drain, cfg_.lat.t_fence_drain);

    state_.l1d.invalidate_all();
    state_.l1i.invalidate_all();
    state_.dtlb.invalidate_all();
    state_.itlb.invalidate_all();
    state_.bht.reset();
    state_.btb.reset();
    step(MicroresetStep::clear_arrays, clear_cost(kMaskL1D | kMaskL1I));

    reset_non_architectural(state_, fresh_);
    step(MicroresetStep::assert_reset, cfg_.lat.t_microreset_assert);

    state_.saved_pc = resume_pc;
    step(MicroresetStep::resume, 0);
    return r;
  }

  MicroArchConfig cfg_;
  MicroState fresh_;
  MicroState state_;
  KernelLayout layout_;
  DomainId domain_;
};

struct WorstCase {
  CsReport report;
  Cycles worst_case_cycles = 0;
  Cycles pad = 0;
};

constexpr Cycles round_up_to(Cycles v, Cycles step) noexcept { return (v + step - 1) / step * step; }

/// Builds the slowest reachable switch: every L1D line dirty (clean under
/// write-through), every L1I line foreign, a miss in flight. Runs it
/// unpadded and rounds the cost up to a multiple of 100.
inline WorstCase measure_worst_case(const MicroArchConfig& cfg, const FenceVariant& variant) {
  Machine m(cfg, kSpyDomain);
  const std::uint64_t base = region_base(kSpyDomain);
  for (std::uint64_t i = 0; i < cfg.l1d.lines(); ++i)
    m.exec_op(Write{base + i * cfg.l1d.line_bytes}, kSpyDomain);
  for (std::uint64_t i = 0; i < cfg.l1i.lines(); ++i)
    m.exec_op(FetchAt{base + 0x1000'0000 + i * cfg.l1i.line_bytes}, kSpyDomain);
  m.exec_op(Write{base + 0x2000'0000}, kSpyDomain);
  m.set_pad(0);
  WorstCase w;
  w.report = m.context_switch(variant, kTrojanDomain);
  w.worst_case_cycles = w.report.total_cycles;
  w.pad = round_up_to(w.worst_case_cycles, 100);
  return w;
}

inline Cycles measure_worst_case_pad(const MicroArchConfig& cfg, const FenceVariant& variant) {
  return measure_worst_case(cfg, variant).pad;
}

}  // namespace tpsim

#endif  // TPSIM_MACHINE_MACHINE_HPP
