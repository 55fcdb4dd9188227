#ifndef TPSIM_MACHINE_STATE_HPP
#define TPSIM_MACHINE_STATE_HPP

#include <cstdint>
#include <string_view>
#include <tuple>

#include "tpsim/machine/config.hpp"
#include "tpsim/uarch/arbiter.hpp"
#include "tpsim/uarch/cache.hpp"
#include "tpsim/uarch/miss_handler.hpp"
#include "tpsim/uarch/predictor.hpp"
#include "tpsim/uarch/serialize.hpp"
#include "tpsim/uarch/tlb.hpp"
#include "tpsim/uarch/write_buffer.hpp"

namespace tpsim {

enum class StateTag : std::uint8_t { architectural, non_architectural };
enum class StateSubset : std::uint8_t { architectural, non_architectural, all };

/// Opaque stand-in for an architectural register file. The simulator never
/// models register contents, only that they survive a microreset.
struct ArchToken {
  std::uint64_t value = 0;
  friend void serialize(ByteSink& sink, const ArchToken& t) { sink.put_u64(t.value); }
  friend constexpr bool operator==(const ArchToken&, const ArchToken&) = default;
};

/// Memory arbiter requestors.
inline constexpr unsigned kArbLoad = 0;
inline constexpr unsigned kArbStore = 1;
inline constexpr unsigned kArbMmu = 2;
inline constexpr unsigned kPipelineDepth = 6;

struct MicroState {
  SetAssocCache l1d;
  SetAssocCache l1i;
  Tlb dtlb;
  Tlb itlb;
  Bht bht;
  Btb btb;
  RoundRobinArbiter mem_arbiter{3};
  WriteBuffer write_buffer;
  MissHandler miss_handler;
  std::uint32_t pipeline_occupancy = 0;

  std::uint64_t saved_pc = 0;
  ArchToken int_regfile;
  ArchToken fp_regfile;
  ArchToken csr_file;
  std::uint64_t pad_ctrl = 0;
  std::uint64_t cycle_counter = 0;

  static MicroState reset(const MicroArchConfig& cfg) {
    cfg.validate();
    MicroState s;
    s.l1d = SetAssocCache(cfg.l1d, cfg.l1d_policy);
    s.l1i = SetAssocCache(cfg.l1i, WritePolicy::write_through);
    s.write_buffer = WriteBuffer(cfg.write_buffer_capacity);
    return s;
  }
};

template <class T>
struct StateField {
  std::string_view name;
  StateTag tag;
  T MicroState::*member;
};

/// Single source of truth for the architectural / non-architectural
/// partition. Digest and microreset both walk this table.
inline constexpr auto kStateFields = std::make_tuple(
    StateField{"l1d", StateTag::non_architectural, &MicroState::l1d},
    StateField{"l1i", StateTag::non_architectural, &MicroState::l1i},
    StateField{"dtlb", StateTag::non_architectural, &MicroState::dtlb},
    StateField{"itlb", StateTag::non_architectural, &MicroState::itlb},
    StateField{"bht", StateTag::non_architectural, &MicroState::bht},
    StateField{"btb", StateTag::non_architectural, &MicroState::btb},
    StateField{"mem_arbiter", StateTag::non_architectural, &MicroState::mem_arbiter},
    StateField{"write_buffer", StateTag::non_architectural, &MicroState::write_buffer},
    StateField{"miss_handler", StateTag::non_architectural, &MicroState::miss_handler},
    StateField{"pipeline_occupancy", StateTag::non_architectural,
               &MicroState::pipeline_occupancy},
    StateField{"saved_pc", StateTag::architectural, &MicroState::saved_pc},
    StateField{"int_regfile", StateTag::architectural, &MicroState::int_regfile},
    StateField{"fp_regfile", StateTag::architectural, &MicroState::fp_regfile},
    StateField{"csr_file", StateTag::architectural, &MicroState::csr_file},
    StateField{"pad_ctrl", StateTag::architectural, &MicroState::pad_ctrl},
    StateField{"cycle_counter", StateTag::architectural, &MicroState::cycle_counter});

template <class F>
constexpr void for_each_state_field(F&& f) {
  std::apply([&](const auto&... field) { (f(field), ...); }, kStateFields);
}

inline void serialize(ByteSink& sink, std::uint32_t v) { sink.put_u32(v); }
inline void serialize(ByteSink& sink, std::uint64_t v) { sink.put_u64(v); }

constexpr bool subset_includes(StateSubset subset, StateTag tag) noexcept {
  switch (subset) {
    case StateSubset::all: return true;
    case StateSubset::architectural: return tag == StateTag::architectural;
    case StateSubset::non_architectural: return tag == StateTag::non_architectural;
  }
  return false;
}

inline std::uint64_t state_digest(const MicroState& s, StateSubset subset) {
  ByteSink sink;
  for_each_state_field([&](const auto& field) {
    if (!subset_includes(subset, field.tag)) return;
    sink.put_tag(field.name);
    serialize(sink, s.*(field.member));
  });
  return fnv1a64(sink.bytes());
}

/// Copies every non-architectural field of `fresh` into `s`.
inline void reset_non_architectural(MicroState& s, const MicroState& fresh) {
  for_each_state_field([&](const auto& field) {
    if (field.tag == StateTag::non_architectural) s.*(field.member) = fresh.*(field.member);
  });
}

}  // namespace tpsim

#endif  // TPSIM_MACHINE_STATE_HPP
