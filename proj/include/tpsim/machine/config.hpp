#ifndef TPSIM_MACHINE_CONFIG_HPP
#define TPSIM_MACHINE_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "tpsim/errors.hpp"
#include "tpsim/uarch/cache.hpp"
#include "tpsim/uarch/predictor.hpp"
#include "tpsim/uarch/tlb.hpp"
#include "tpsim/uarch/write_buffer.hpp"

namespace tpsim {

using Cycles = std::uint64_t;

struct Latencies {
  Cycles t_hit = 1;
  Cycles t_miss = 20;
  Cycles t_wb_per_line = 8;
  Cycles t_mispredict = 5;
  Cycles t_tlb_miss = 40;
  Cycles t_pipeline_flush = 6;
  Cycles t_fence_drain = 16;
  Cycles t_microreset_assert = 16;
};

/// Context-switch routine costs on a hot kernel working set.
struct KernelCosts {
  Cycles clint_reconfig = 1800;
  Cycles schedule = 800;
  Cycles thread_switch = 320;

  constexpr Cycles total() const noexcept { return clint_reconfig + schedule + thread_switch; }
};

/// Structural and latency parameters of the simulated core. Defaults
/// describe a small in-order core: 32 KiB 8-way L1D, 16 KiB 4-way L1I,
/// 16-byte lines, 16-entry TLBs, 64-entry BHT, 16-entry BTB.
struct MicroArchConfig {
  CacheGeometry l1d{256, 8, 16};
  WritePolicy l1d_policy = WritePolicy::write_through;
  CacheGeometry l1i{256, 4, 16};
  unsigned dtlb_entries = Tlb::kEntries;
  unsigned itlb_entries = Tlb::kEntries;
  unsigned bht_entries = Bht::kEntries;
  unsigned btb_entries = Btb::kEntries;
  unsigned write_buffer_capacity = WriteBuffer::kDefaultCapacity;
  Latencies lat{};
  KernelCosts kernel{};
  /// Unset means "enabled exactly when the L1D is write-through".
  std::optional<bool> miss_handler_trace;
  /// Freezes LFSRs and zeroes arbiter delays, isolating the primary
  /// hit/miss timing of the caches.
  bool pin_secondary = false;

  bool miss_handler_trace_enabled() const noexcept {
    return miss_handler_trace.value_or(l1d_policy == WritePolicy::write_through);
  }

  void validate() const {
    if (dtlb_entries != Tlb::kEntries || itlb_entries != Tlb::kEntries)
      throw ContractViolation("TLBs are built with 16 entries");
    if (bht_entries != Bht::kEntries) throw ContractViolation("BHT is built with 64 entries");
    if (btb_entries != Btb::kEntries) throw ContractViolation("BTB is built with 16 entries");
    if (write_buffer_capacity == 0) throw ContractViolation("write buffer capacity must be >= 1");
    if (lat.t_miss <= lat.t_hit) throw ContractViolation("t_miss must exceed t_hit");
    // Geometry is checked by SetAssocCache itself.
    SetAssocCache probe_d(l1d, l1d_policy);
    SetAssocCache probe_i(l1i, WritePolicy::write_through);
  }
};

inline std::string_view to_string(WritePolicy p) noexcept {
  return p == WritePolicy::write_back ? "write_back" : "write_through";
}

inline std::optional<WritePolicy> parse_write_policy(std::string_view s) noexcept {
  if (s == "write_back") return WritePolicy::write_back;
  if (s == "write_through") return WritePolicy::write_through;
  return std::nullopt;
}

}  // namespace tpsim

#endif  // TPSIM_MACHINE_CONFIG_HPP
