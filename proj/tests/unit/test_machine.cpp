#include <gtest/gtest.h>

#include <random>
#include <set>
#include <vector>

#include "tpsim/machine/machine.hpp"

using namespace tpsim;

namespace {

MicroArchConfig wb_config() {
  MicroArchConfig c;
  c.l1d_policy = WritePolicy::write_back;
  return c;
}

MicroArchConfig pinned_config() {
  MicroArchConfig c;
  c.pin_secondary = true;
  return c;
}

std::uint64_t spy(std::uint64_t off) { return region_base(kSpyDomain) + off; }
std::uint64_t trojan(std::uint64_t off) { return region_base(kTrojanDomain) + off; }

// Random mixed workload confined to one domain.
Workload random_workload(std::mt19937_64& rng, DomainId d, std::size_t n) {
  Workload w;
  const std::uint64_t base = region_base(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t off = (rng() % (1U << 18)) & ~std::uint64_t{3};
    switch (rng() % 5) {
      case 0: w.emplace_back(Read{base + off}); break;
      case 1: w.emplace_back(Write{base + off}); break;
      case 2: w.emplace_back(CondBranch{base + off, static_cast<bool>(rng() & 1)}); break;
      case 3: w.emplace_back(IndirectJump{base + off, base + ((rng() % 4096) << 2)}); break;
      default: w.emplace_back(FetchAt{base + off}); break;
    }
  }
  return w;
}

std::uint64_t fresh_digest(const MicroArchConfig& c) {
  return state_digest(MicroState::reset(c), StateSubset::non_architectural);
}

}  // namespace

TEST(Config, DefaultsMatchCoreCapacities) {
  const MicroArchConfig c;
  EXPECT_EQ(c.l1d.capacity_bytes(), 32U * 1024U);
  EXPECT_EQ(c.l1i.capacity_bytes(), 16U * 1024U);
  EXPECT_EQ(c.l1d.ways, 8U);
  EXPECT_EQ(c.l1i.ways, 4U);
  EXPECT_EQ(c.kernel.total(), 2920U);
  EXPECT_TRUE(c.miss_handler_trace_enabled());
  EXPECT_FALSE(wb_config().miss_handler_trace_enabled());
  MicroArchConfig bad;
  bad.lat.t_miss = bad.lat.t_hit;
  EXPECT_THROW(bad.validate(), ContractViolation);
}

TEST(State, PartitionIsTotalAndTagged) {
  std::set<std::string_view> names;
  unsigned arch = 0;
  for_each_state_field([&](const auto& f) {
    EXPECT_TRUE(names.insert(f.name).second);
    arch += f.tag == StateTag::architectural ? 1 : 0;
  });
  EXPECT_EQ(names.size(), 16U);
  EXPECT_EQ(arch, 6U);
  for (auto n : {"saved_pc", "int_regfile", "fp_regfile", "csr_file", "pad_ctrl", "cycle_counter"})
    EXPECT_TRUE(names.count(n)) << n;
}

TEST(State, DigestSeparatesSubsets) {
  const MicroArchConfig c;
  const MicroState a = MicroState::reset(c);
  MicroState b = MicroState::reset(c);
  EXPECT_EQ(state_digest(a, StateSubset::all), state_digest(b, StateSubset::all));
  b.bht.access(0, true);
  EXPECT_NE(state_digest(a, StateSubset::non_architectural),
            state_digest(b, StateSubset::non_architectural));
  EXPECT_EQ(state_digest(a, StateSubset::architectural), state_digest(b, StateSubset::architectural));
  MicroState d = MicroState::reset(c);
  d.csr_file.value = 1;
  EXPECT_EQ(state_digest(a, StateSubset::non_architectural),
            state_digest(d, StateSubset::non_architectural));
  EXPECT_NE(state_digest(a, StateSubset::architectural), state_digest(d, StateSubset::architectural));
}

TEST(State, FreshDigestIsStableAcrossRuns) {
  EXPECT_EQ(fresh_digest(MicroArchConfig{}), fresh_digest(MicroArchConfig{}));
  EXPECT_EQ(fresh_digest(MicroArchConfig{}), 0xc0d9f1fbb5fca279ULL);
}

TEST(ExecOp, ReadTwice) {
  Machine m{MicroArchConfig{}};
  const Cycles first = m.exec_op(Read{spy(0x100)}, kSpyDomain);
  const Cycles second = m.exec_op(Read{spy(0x100)}, kSpyDomain);
  EXPECT_GE(first, m.config().lat.t_miss);
  EXPECT_GE(second, m.config().lat.t_hit);
  EXPECT_LT(second, m.config().lat.t_miss);

  Machine p{pinned_config()};
  p.exec_op(Read{spy(0x100)}, kSpyDomain);
  EXPECT_EQ(p.exec_op(Read{spy(0x100)}, kSpyDomain), p.config().lat.t_hit);
}

TEST(ExecOp, FreshTakenBranchMispredicts) {
  Machine m{MicroArchConfig{}};
  EXPECT_EQ(m.exec_op(CondBranch{spy(0x40), true}, kSpyDomain), 1 + m.config().lat.t_mispredict);
  EXPECT_EQ(m.exec_op(CondBranch{spy(0x80), false}, kSpyDomain), 1U);
}

TEST(ExecOp, RejectsForeignAddressesAndDomains) {
  Machine m{MicroArchConfig{}};
  EXPECT_THROW(m.exec_op(Read{trojan(0)}, kSpyDomain), ContractViolation);
  EXPECT_THROW(m.exec_op(FetchAt{0x10}, kSpyDomain), ContractViolation);
  EXPECT_THROW(m.exec_op(Read{trojan(0)}, kTrojanDomain), ContractViolation);
}

TEST(ExecOp, CycleCounterTracksCost) {
  Machine m{MicroArchConfig{}};
  std::mt19937_64 rng(1);
  Cycles sum = 0;
  for (const auto& op : random_workload(rng, kSpyDomain, 500)) sum += m.exec_op(op, kSpyDomain);
  EXPECT_EQ(m.cycle(), sum);
  EXPECT_LE(m.state().pipeline_occupancy, kPipelineDepth);
}

TEST(RunSequence, EmptyAndFold) {
  Machine m{MicroArchConfig{}};
  EXPECT_EQ(m.run_sequence({}, kSpyDomain), 0U);

  std::mt19937_64 rng(2);
  const Workload a = random_workload(rng, kSpyDomain, 300);
  const Workload b = random_workload(rng, kSpyDomain, 300);
  Workload ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  Machine x{MicroArchConfig{}}, y{MicroArchConfig{}};
  const Cycles split = x.run_sequence(a, kSpyDomain) + x.run_sequence(b, kSpyDomain);
  EXPECT_EQ(y.run_sequence(ab, kSpyDomain), split);
  EXPECT_EQ(state_digest(x.state(), StateSubset::all), state_digest(y.state(), StateSubset::all));
}

TEST(RunSequence, ColdReadsCostAtLeastMisses) {
  Machine m{wb_config()};
  Workload w;
  for (std::uint64_t i = 0; i < 1000; ++i) w.emplace_back(Read{spy(i * 16)});
  EXPECT_GE(m.run_sequence(w, kSpyDomain), 1000 * m.config().lat.t_miss);
}

TEST(ExecOp, PinnedProbeGrowsByMissPenaltyPerDisplacedLine) {
  const MicroArchConfig cfg = pinned_config();
  Machine base{cfg};
  Workload prime;
  for (std::uint64_t i = 0; i < cfg.l1d.lines(); ++i) prime.emplace_back(Read{spy(i * 16)});
  base.run_sequence(prime, kSpyDomain);
  base.run_sequence(prime, kSpyDomain);
  auto probe_after = [&](unsigned s) {
    Machine m = base;
    m.set_current_domain(kTrojanDomain);
    for (unsigned i = 0; i < s; ++i) m.exec_op(Read{trojan(0x10000 + i * 16)}, kTrojanDomain);
    m.set_current_domain(kSpyDomain);
    return m.run_sequence(prime, kSpyDomain);
  };
  const Cycles t0 = probe_after(0);
  for (unsigned s : {1U, 2U, 17U, 100U, 192U, 255U, 256U})
    EXPECT_EQ(probe_after(s) - t0, s * (cfg.lat.t_miss - cfg.lat.t_hit)) << "s=" << s;
}

TEST(ContextSwitch, HotKernelCostsSumOfRoutines) {
  Machine m{MicroArchConfig{}};
  const FenceVariant none{};
  const CsReport cold = m.context_switch(none, kTrojanDomain);
  EXPECT_EQ(cold.kernel.missed_lines, KernelLayout::kDataLines + KernelLayout::kInstrLines);
  EXPECT_EQ(cold.total_cycles, 2920U + 96U * m.config().lat.t_miss);
  const CsReport hot = m.context_switch(none, kSpyDomain);
  EXPECT_EQ(hot.total_cycles, 2920U);
  EXPECT_EQ(hot.kernel.clint_reconfig, 1800U);
  EXPECT_EQ(hot.kernel.schedule, 800U);
  EXPECT_EQ(hot.kernel.thread_switch, 320U);
  EXPECT_EQ(m.current_domain(), kSpyDomain);
  EXPECT_EQ(hot.total_cycles, hot.kernel_cycles + hot.fence_cycles + hot.pad_stall);
}

TEST(ContextSwitch, KernelInflatesPerEvictedLine) {
  Machine m{MicroArchConfig{}};
  m.context_switch({}, kSpyDomain);
  const auto& k = m.kernel_layout();
  // Evict exactly three kernel D-lines: fill their sets with spy lines.
  for (unsigned n = 0; n < 3; ++n) {
    const std::uint64_t set_off = k.data[n] - region_base(kKernelDomain);
    for (std::uint64_t w = 0; w < 64; ++w) m.exec_op(Read{spy(set_off + w * 4096)}, kSpyDomain);
  }
  unsigned evicted = 0;
  for (auto a : k.data) evicted += m.state().l1d.contains(a) ? 0 : 1;
  const CsReport r = m.context_switch({}, kTrojanDomain);
  EXPECT_EQ(r.kernel.missed_lines, evicted);
  EXPECT_EQ(r.total_cycles, 2920U + evicted * m.config().lat.t_miss);
}

TEST(ContextSwitch, MicroresetFenceAffineInDirtyLines) {
  const MicroArchConfig cfg = wb_config();
  std::vector<std::pair<unsigned, Cycles>> pts;
  for (unsigned d : {0U, 64U, 512U, 2048U}) {
    Machine m{cfg};
    m.context_switch({}, kSpyDomain);
    for (std::uint64_t i = 0; i < d; ++i) m.exec_op(Write{spy(i * 16)}, kSpyDomain);
    const CsReport r = m.context_switch({Mitigation::microreset}, kTrojanDomain);
    pts.emplace_back(r.writebacks, r.fence_cycles);
    EXPECT_EQ(r.microreset_steps[static_cast<std::size_t>(MicroresetStep::drain)], 16U);
    EXPECT_EQ(r.microreset_steps[static_cast<std::size_t>(MicroresetStep::assert_reset)], 16U);
  }
  // Kernel refills evict some dirty lines first; writebacks must still be
  // affine with slope t_wb_per_line.
  const Cycles c0 = pts[0].second - Cycles{pts[0].first} * cfg.lat.t_wb_per_line;
  for (auto [w, f] : pts) EXPECT_EQ(f, c0 + Cycles{w} * cfg.lat.t_wb_per_line);
  EXPECT_EQ(pts[0].first, 0U);
  EXPECT_GT(pts[3].first, 1900U);
}

TEST(ContextSwitch, PaddedMicroresetTotalEqualsPad) {
  const MicroArchConfig cfg = wb_config();
  for (unsigned d : {0U, 64U, 512U, 2048U}) {
    Machine m{cfg};
    for (std::uint64_t i = 0; i < d; ++i) m.exec_op(Write{spy(i * 16)}, kSpyDomain);
    m.set_pad(30000);
    const CsReport r = m.context_switch({Mitigation::microreset}, kTrojanDomain);
    EXPECT_EQ(r.total_cycles, 30000U);
    EXPECT_TRUE(r.padded);
  }
}

TEST(ContextSwitch, PadAppliesOnlyToFenceVariants) {
  Machine m{MicroArchConfig{}};
  m.set_pad(50000);
  EXPECT_LT(m.context_switch({}, kTrojanDomain).total_cycles, 50000U);
  EXPECT_LT(m.context_switch({Mitigation::sw_prime, kMaskL1D}, kSpyDomain).total_cycles, 50000U);
}

TEST(ContextSwitch, InterruptOverrideCountsElapsedTime) {
  Machine m{MicroArchConfig{}};
  m.idle_until(10000);
  m.set_pad(20000);
  const CsReport r = m.context_switch({Mitigation::microreset}, kTrojanDomain, {Cycles{9000}});
  EXPECT_EQ(m.cycle(), 9000U + 20000U);
  EXPECT_EQ(r.total_cycles, 19000U);
  EXPECT_THROW(m.context_switch({}, kSpyDomain, {Cycles{1'000'000}}), ContractViolation);
}

TEST(ContextSwitch, UnderProvisionedPadThrows) {
  Machine m{wb_config()};
  for (std::uint64_t i = 0; i < 2048; ++i) m.exec_op(Write{spy(i * 16)}, kSpyDomain);
  m.set_pad(5000);
  try {
    m.context_switch({Mitigation::microreset}, kTrojanDomain);
    FAIL() << "expected PadExceeded";
  } catch (const PadExceeded& e) {
    EXPECT_GT(e.overshoot(), 0U);
  }
  EXPECT_EQ(m.current_domain(), kSpyDomain);
}

TEST(ContextSwitch, SwPrimeRunsKernelTraversal) {
  Machine m{MicroArchConfig{}};
  m.context_switch({}, kSpyDomain);
  const CsReport r1 = m.context_switch({Mitigation::sw_prime, kMaskL1D, 1}, kTrojanDomain);
  EXPECT_GE(r1.fence_cycles, 2048U * m.config().lat.t_hit);
  const Workload ops = kernel_prime_ops(m.config(), kMaskL1D | kMaskL1I, 3);
  EXPECT_EQ(ops.size(), 3U * (2048U + 1024U));
  EXPECT_THROW(kernel_prime_ops(m.config(), kMaskL1D, 0), ContractViolation);
}

TEST(Fence, RejectsNonFenceVariants) {
  Machine m{MicroArchConfig{}};
  EXPECT_THROW(m.apply_fence_t({Mitigation::none}), ContractViolation);
  EXPECT_THROW(m.apply_fence_t({Mitigation::sw_prime}), ContractViolation);
}

TEST(Fence, ReservedMaskBitsRejected) {
  Machine m{MicroArchConfig{}};
  for (std::uint32_t bad : {1U << 5, 1U << 19, 1U << 20, 0xFFFFFU}) {
    EXPECT_THROW(m.apply_fence_t({Mitigation::basic_flush, bad}), InvalidMask);
    EXPECT_THROW(m.apply_fence_t({Mitigation::microreset, bad}), InvalidMask);
    EXPECT_THROW(m.context_switch({Mitigation::full_flush, bad}, kSpyDomain), InvalidMask);
  }
}

TEST(Fence, MicroresetOnFreshMachineIsFixpoint) {
  Machine m{wb_config()};
  const auto before = state_digest(m.state(), StateSubset::non_architectural);
  const FenceResult r = m.apply_fence_t({Mitigation::microreset});
  EXPECT_EQ(r.writebacks, 0U);
  EXPECT_EQ(state_digest(m.state(), StateSubset::non_architectural), before);
}

TEST(Fence, MicroresetClearsAllNonArchitecturalState) {
  for (const MicroArchConfig& cfg : {MicroArchConfig{}, wb_config(), pinned_config()}) {
    const auto fresh = fresh_digest(cfg);
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 200; ++trial) {
      Machine m{cfg};
      m.run_sequence(random_workload(rng, kSpyDomain, rng() % 400), kSpyDomain);
      if (rng() & 1) m.context_switch({Mitigation::basic_flush}, kTrojanDomain);
      else m.context_switch({}, kTrojanDomain);
      m.run_sequence(random_workload(rng, kTrojanDomain, rng() % 400), kTrojanDomain);
      m.apply_fence_t({Mitigation::microreset, static_cast<std::uint32_t>(rng() % 32)});
      ASSERT_EQ(state_digest(m.state(), StateSubset::non_architectural), fresh) << trial;
    }
  }
}

TEST(Fence, ArchitecturalStateSurvivesEveryFence) {
  for (Mitigation k : {Mitigation::basic_flush, Mitigation::full_flush, Mitigation::microreset}) {
    Machine m{wb_config()};
    auto& s = m.state();
    s.saved_pc = 0x1234;
    s.int_regfile.value = 7;
    s.fp_regfile.value = 8;
    s.csr_file.value = 9;
    m.set_pad(777);
    std::mt19937_64 rng(3);
    m.run_sequence(random_workload(rng, kSpyDomain, 300), kSpyDomain);
    m.apply_fence_t({k});
    EXPECT_EQ(s.saved_pc, 0x1234U);
    EXPECT_EQ(s.int_regfile.value, 7U);
    EXPECT_EQ(s.fp_regfile.value, 8U);
    EXPECT_EQ(s.csr_file.value, 9U);
    EXPECT_EQ(s.pad_ctrl, 777U);
  }
}

TEST(Fence, FullFlushDigestEqualsFreshOnlyWithoutSurvivingMiss) {
  {
    MicroArchConfig cfg;  // write-through, trace enabled
    Machine m{cfg};
    m.exec_op(Read{spy(0x40)}, kSpyDomain);
    ASSERT_TRUE(m.state().miss_handler.in_flight());
    m.apply_fence_t({Mitigation::full_flush});
    EXPECT_TRUE(m.state().miss_handler.stale());
    EXPECT_NE(state_digest(m.state(), StateSubset::non_architectural), fresh_digest(cfg));
  }
  {
    MicroArchConfig cfg;
    cfg.miss_handler_trace = false;
    Machine m{cfg};
    std::mt19937_64 rng(9);
    m.run_sequence(random_workload(rng, kSpyDomain, 500), kSpyDomain);
    m.apply_fence_t({Mitigation::full_flush});
    EXPECT_EQ(state_digest(m.state(), StateSubset::non_architectural), fresh_digest(cfg));
  }
}

TEST(Fence, BasicFlushKeepsLfsrPhase) {
  const MicroArchConfig cfg = wb_config();
  for (unsigned misses : {1U, 5U, 37U}) {
    Machine m{cfg};
    for (unsigned i = 0; i < misses; ++i) m.exec_op(Read{spy(i * 16)}, kSpyDomain);
    m.apply_fence_t({Mitigation::basic_flush});
    Lfsr8 oracle;
    for (unsigned i = 0; i < misses; ++i) oracle = lfsr_next(oracle, 8).next;
    EXPECT_EQ(m.state().l1d.lfsr(), oracle);
    EXPECT_NE(state_digest(m.state(), StateSubset::non_architectural), fresh_digest(cfg));
  }
}

TEST(Fence, BasicFlushLeavesHistoryDependentState) {
  MicroArchConfig cfg;
  Machine a{cfg}, b{cfg};
  a.exec_op(Read{spy(0x00)}, kSpyDomain);
  b.exec_op(Read{spy(0x30)}, kSpyDomain);
  b.exec_op(Read{spy(0x50)}, kSpyDomain);
  a.apply_fence_t({Mitigation::basic_flush});
  b.apply_fence_t({Mitigation::basic_flush});
  EXPECT_NE(state_digest(a.state(), StateSubset::non_architectural),
            state_digest(b.state(), StateSubset::non_architectural));
}

TEST(Fence, StaleMissReplaysIntoArbiters) {
  MicroArchConfig cfg;
  Machine m{cfg};
  m.exec_op(Read{spy(0x30)}, kSpyDomain);  // slot 3
  m.apply_fence_t({Mitigation::full_flush});
  EXPECT_EQ(m.state().write_buffer.lookup_arbiter().ptr(), 0U);
  m.exec_op(CondBranch{spy(0), false}, kSpyDomain);
  EXPECT_TRUE(m.state().miss_handler.stale());
  m.exec_op(Read{spy(0x100)}, kSpyDomain);
  EXPECT_FALSE(m.state().miss_handler.stale());
  // Replay granted slot 3, then the read granted slot 0.
  EXPECT_EQ(m.state().write_buffer.lookup_arbiter().ptr(), 1U);
}

TEST(PadUntil, Examples) {
  Machine m{MicroArchConfig{}};
  m.idle_until(1300);
  EXPECT_EQ(m.pad_until(1000, 0), 0U);
  EXPECT_EQ(m.pad_until(1000, 1000), 700U);
  EXPECT_EQ(m.cycle(), 2000U);
  Machine n{MicroArchConfig{}};
  n.idle_until(2001);
  try {
    n.pad_until(1000, 1000);
    FAIL();
  } catch (const PadExceeded& e) {
    EXPECT_EQ(e.overshoot(), 1U);
  }
  EXPECT_THROW(n.pad_until(5000, 10), ContractViolation);
}

TEST(WorstCasePad, WriteThroughHasNoWritebacks) {
  const WorstCase w = measure_worst_case(MicroArchConfig{}, {Mitigation::microreset});
  EXPECT_EQ(w.report.writebacks, 0U);
  EXPECT_EQ(w.pad % 100, 0U);
  EXPECT_GE(w.pad, w.worst_case_cycles);
  EXPECT_LT(w.pad - w.worst_case_cycles, 100U);
  EXPECT_GE(w.worst_case_cycles, 2920U + 96U * 20U);
}

TEST(WorstCasePad, WriteBackCoversFullWriteback) {
  const MicroArchConfig cfg = wb_config();
  const Cycles pad = measure_worst_case_pad(cfg, {Mitigation::microreset});
  EXPECT_GE(pad, 256U * 8U * cfg.lat.t_wb_per_line);
  EXPECT_GE(pad, 20000U);
  EXPECT_LE(pad, 24000U);
}

namespace {

void soak(const MicroArchConfig& cfg, Mitigation kind, int iterations, std::uint64_t seed) {
  const FenceVariant v{kind};
  const Cycles pad = measure_worst_case_pad(cfg, v);
  Machine m{cfg};
  m.set_pad(pad);
  std::mt19937_64 rng(seed);
  std::set<Cycles> totals;
  DomainId next = kTrojanDomain;
  for (int i = 0; i < iterations; ++i) {
    const DomainId d = m.current_domain();
    const std::size_t n = (i % 97 == 0) ? 2100 : rng() % 24;
    if (i % 97 == 0) {
      for (std::uint64_t k = 0; k < n; ++k)
        m.exec_op(Write{region_base(d) + ((rng() % 64) << 12) + k * 16}, d);
    } else {
      m.run_sequence(random_workload(rng, d, n), d);
    }
    const CsReport r = m.context_switch(v, next);
    totals.insert(r.total_cycles);
    next = d;
  }
  EXPECT_EQ(totals.size(), 1U);
  EXPECT_EQ(*totals.begin(), pad);
}

}  // namespace

TEST(WorstCasePad, SoakNeverExceedsAndTotalsConstant) {
  soak(wb_config(), Mitigation::microreset, 100000, 1);
  soak(MicroArchConfig{}, Mitigation::microreset, 20000, 2);
  soak(wb_config(), Mitigation::basic_flush, 20000, 3);
  soak(MicroArchConfig{}, Mitigation::full_flush, 20000, 4);
}
