#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "tpsim/attacks/attack.hpp"
#include "tpsim/harness/experiment.hpp"
#include "tpsim/leakage/leakage.hpp"

using namespace tpsim;

namespace {

MicroArchConfig arch(WritePolicy p = WritePolicy::write_through, bool pinned = false) {
  MicroArchConfig c;
  c.l1d_policy = p;
  c.pin_secondary = pinned;
  return c;
}

AttackSpec spec(AttackKind k, Mitigation m, Cycles pad = 0) {
  AttackSpec s;
  s.kind = k;
  s.mitigation.kind = m;
  s.pad = pad;
  return s;
}

// Time of one iteration per secret, each started from the same warmed-up
// machine.
std::vector<Cycles> sweep(const MicroArchConfig& c, const AttackSpec& s, std::uint32_t step = 1) {
  Machine base(c);
  const std::uint32_t n = secret_range(s.kind, c);
  const Workload prime = s.kind == AttackKind::cs_latency ? Workload{} : gen_prime(s.kind, c);
  auto once = [&](Machine& m, std::uint32_t secret, std::uint64_t seed) {
    return s.kind == AttackKind::cs_latency ? run_cs_iteration(m, s, secret, seed)
                                            : run_pp_iteration(m, s, secret, seed, &prime);
  };
  once(base, 0, 999);
  std::vector<Cycles> t;
  for (std::uint32_t secret = 0; secret < n; secret += step) {
    Machine m = base;
    t.push_back(once(m, secret, secret + 1));
  }
  return t;
}

std::size_t descents(const std::vector<Cycles>& t) {
  std::size_t d = 0;
  for (std::size_t i = 1; i < t.size(); ++i) d += t[i] < t[i - 1];
  return d;
}

Cycles spread(const std::vector<Cycles>& t) {
  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  return *hi - *lo;
}

std::uint64_t op_addr(const WorkloadOp& op) {
  return std::visit(
      [](const auto& o) -> std::uint64_t {
        if constexpr (requires { o.addr; }) return o.addr;
        else return o.pc;
      },
      op);
}

std::vector<std::uint64_t> addrs(const Workload& w) {
  std::vector<std::uint64_t> out;
  for (const auto& op : w) out.push_back(op_addr(op));
  return out;
}

}  // namespace

TEST(Prime, LengthsMatchCapacities) {
  const MicroArchConfig c;
  EXPECT_EQ(gen_prime(AttackKind::l1d, c).size(), 2048U);
  EXPECT_EQ(gen_prime(AttackKind::l1i, c).size(), 1024U);
  EXPECT_EQ(gen_prime(AttackKind::dtlb, c).size(), 16U);
  EXPECT_EQ(gen_prime(AttackKind::btb, c).size(), 16U);
  EXPECT_EQ(gen_prime(AttackKind::bht, c).size(), 64U);
  for (AttackKind k : kPrimeProbeKinds) EXPECT_EQ(gen_prime(k, c).size(), secret_range(k, c)) << to_string(k);
}

TEST(Prime, DtlbUsesOnePagePerRead) {
  const MicroArchConfig c;
  const auto a = addrs(gen_prime(AttackKind::dtlb, c));
  std::set<std::uint64_t> pages;
  for (auto x : a) pages.insert(x / kPageBytes);
  EXPECT_EQ(pages.size(), 16U);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_EQ(a[i] / kPageBytes - a[i - 1] / kPageBytes, 1U);
}

TEST(Prime, CapacityExactCoverage) {
  const MicroArchConfig c;
  SetAssocCache d(c.l1d, WritePolicy::write_through);
  std::vector<unsigned> per_set(c.l1d.sets, 0);
  std::set<std::uint64_t> lines;
  for (auto a : addrs(gen_prime(AttackKind::l1d, c))) {
    ++per_set[d.set_index(a)];
    lines.insert(d.line_number(a));
  }
  EXPECT_EQ(lines.size(), c.l1d.lines());
  for (unsigned n : per_set) EXPECT_EQ(n, c.l1d.ways);

  SetAssocCache i(c.l1i, WritePolicy::write_through);
  std::vector<unsigned> iset(c.l1i.sets, 0);
  for (auto a : addrs(gen_prime(AttackKind::l1i, c))) ++iset[i.set_index(a)];
  for (unsigned n : iset) EXPECT_EQ(n, c.l1i.ways);

  std::set<std::uint64_t> slots;
  for (const auto& op : gen_prime(AttackKind::btb, c)) slots.insert((std::get<IndirectJump>(op).pc >> 2) % 16);
  EXPECT_EQ(slots.size(), 16U);
  slots.clear();
  for (const auto& op : gen_prime(AttackKind::bht, c)) slots.insert((std::get<CondBranch>(op).pc >> 2) % 64);
  EXPECT_EQ(slots.size(), 64U);
}

TEST(Prime, SecondRunAllHits) {
  const MicroArchConfig c = arch(WritePolicy::write_through, true);
  Machine m(c);
  const Workload p = gen_prime(AttackKind::l1d, c);
  m.run_sequence(p, kSpyDomain);
  EXPECT_EQ(m.run_sequence(p, kSpyDomain), p.size() * c.lat.t_hit);
}

TEST(Trojan, SecretZeroIsEmpty) {
  const MicroArchConfig c;
  for (AttackKind k : kPrimeProbeKinds) EXPECT_TRUE(gen_trojan(k, c, 0).empty()) << to_string(k);
}

TEST(Trojan, L1dTouchesSecretDistinctLines) {
  const MicroArchConfig c;
  SetAssocCache d(c.l1d, WritePolicy::write_through);
  for (std::uint32_t s : {1U, 7U, 300U, 2047U}) {
    std::set<std::uint64_t> lines;
    for (auto a : addrs(gen_trojan(AttackKind::l1d, c, s, trojan_window(s)))) lines.insert(d.line_number(a));
    EXPECT_EQ(lines.size(), s);
  }
}

TEST(Trojan, StaysInItsRegion) {
  const MicroArchConfig c;
  for (AttackKind k : {AttackKind::l1d, AttackKind::l1i, AttackKind::dtlb, AttackKind::btb, AttackKind::bht,
                       AttackKind::cs_latency}) {
    const auto ops = gen_trojan(k, c, secret_range(k, c) - 1, (layout::kWindowCount - 1) * layout::kWindowStride);
    for (const auto& op : ops) ASSERT_TRUE(in_region(kTrojanDomain, op_addr(op))) << to_string(k);
  }
}

TEST(Trojan, RejectsBadArguments) {
  const MicroArchConfig c;
  EXPECT_THROW(gen_trojan(AttackKind::btb, c, 16), ContractViolation);
  EXPECT_THROW(gen_trojan(AttackKind::cs_latency, c, 256), ContractViolation);
  EXPECT_THROW(gen_trojan(AttackKind::l1d, c, 1, 100), ContractViolation);
  EXPECT_EQ(trojan_window(5) % kPageBytes, 0U);
}

TEST(Trojan, CsSliceHasFixedFillerAndScaledWrites) {
  const MicroArchConfig c;
  EXPECT_EQ(gen_trojan(AttackKind::cs_latency, c, 0).size(), layout::kCsFillerOps);
  EXPECT_EQ(gen_trojan(AttackKind::cs_latency, c, 255).size(), layout::kCsFillerOps + c.l1d.lines());
  EXPECT_EQ(cs_dirty_lines(255, 2048), 2048U);
  EXPECT_EQ(cs_dirty_lines(1, 2048), 8U);
}

TEST(PrimeProbe, PinnedL1dGrowsByMissPenaltyPerLine) {
  // Pinned replacement always picks way 1. The kernel routine already takes
  // way 1 of the sets holding its data (192 and up), so only the first 192
  // sets carry the secret.
  const MicroArchConfig c = arch(WritePolicy::write_through, true);
  const AttackSpec s = spec(AttackKind::l1d, Mitigation::none);
  const auto t = sweep(c, s);
  for (std::uint32_t secret : {1U, 2U, 17U, 100U, 192U})
    EXPECT_EQ(t[secret] - t[0], secret * (c.lat.t_miss - c.lat.t_hit)) << secret;
  EXPECT_EQ(t[256], t[192]);
}

TEST(PrimeProbe, BhtCostsAtLeastOneMispredictPerSecret) {
  const MicroArchConfig c;
  const AttackSpec s = spec(AttackKind::bht, Mitigation::none);
  Machine m(c);
  run_pp_iteration(m, s, 0, 1);
  const Cycles base = run_pp_iteration(m, s, 0, 2);
  for (std::uint32_t secret = 1; secret < 64; ++secret)
    EXPECT_GE(run_pp_iteration(m, s, secret, 3) - base, secret * c.lat.t_mispredict) << secret;
}

TEST(PrimeProbe, PinnedSweepsAreMonotone) {
  for (WritePolicy p : {WritePolicy::write_through, WritePolicy::write_back})
    for (AttackKind k : kPrimeProbeKinds) {
      const auto t = sweep(arch(p, true), spec(k, Mitigation::none));
      EXPECT_EQ(descents(t), 0U) << to_string(k) << ' ' << to_string(p);
      EXPECT_GT(t.back(), t.front()) << to_string(k);
    }
}

TEST(PrimeProbe, DefaultPredictorSweepsAreMonotone) {
  for (WritePolicy p : {WritePolicy::write_through, WritePolicy::write_back})
    for (AttackKind k : {AttackKind::btb, AttackKind::bht})
      EXPECT_EQ(descents(sweep(arch(p), spec(k, Mitigation::none))), 0U) << to_string(k);
}

TEST(PrimeProbe, DefaultL1dSweepIsRankCorrelated) {
  // Random replacement lets the probe evict its own lines, so the default
  // machine is only monotone in rank.
  const auto t = sweep(arch(), spec(AttackKind::l1d, Mitigation::none));
  SampleSet s;
  for (std::uint32_t i = 0; i < t.size(); ++i) s.pairs.push_back({i, t[i]});
  EXPECT_GE(spearman(s), 0.9);
}

TEST(PrimeProbe, MicroresetWithPadIsConstant) {
  for (WritePolicy p : {WritePolicy::write_through, WritePolicy::write_back}) {
    const MicroArchConfig c = arch(p);
    const Cycles pad = measure_worst_case_pad(c, FenceVariant{Mitigation::microreset});
    for (AttackKind k : kPrimeProbeKinds) {
      const auto t = sweep(c, spec(k, Mitigation::microreset, pad), k == AttackKind::l1d ? 7 : 1);
      EXPECT_EQ(spread(t), 0U) << to_string(k) << ' ' << to_string(p);
    }
  }
}

TEST(PrimeProbe, SwPrimeShrinksButKeepsTheRange) {
  const MicroArchConfig c = arch(WritePolicy::write_through, true);
  const auto open = sweep(c, spec(AttackKind::l1d, Mitigation::none), 8);
  const auto sw = sweep(c, spec(AttackKind::l1d, Mitigation::sw_prime), 8);
  EXPECT_GT(spread(sw), 0U);
  EXPECT_LT(spread(sw), spread(open));
}

TEST(PrimeProbe, CsKindRejected) {
  Machine m{MicroArchConfig{}};
  EXPECT_THROW(run_pp_iteration(m, spec(AttackKind::cs_latency, Mitigation::none), 0, 1), ContractViolation);
}

TEST(ContextSwitchAttack, UnpaddedFenceStrictlyIncreasingOnWriteBack) {
  const MicroArchConfig c = arch(WritePolicy::write_back);
  for (Mitigation mit : {Mitigation::basic_flush, Mitigation::full_flush, Mitigation::microreset}) {
    const auto t = sweep(c, spec(AttackKind::cs_latency, mit));
    for (std::size_t i = 1; i < t.size(); ++i) ASSERT_LT(t[i - 1], t[i]) << to_string(mit) << " at " << i;
  }
}

TEST(ContextSwitchAttack, UnmitigatedWriteBackIsMonotone) {
  const auto t = sweep(arch(WritePolicy::write_back), spec(AttackKind::cs_latency, Mitigation::none));
  EXPECT_EQ(descents(t), 0U);
  EXPECT_GT(t.back(), t.front());
}

TEST(ContextSwitchAttack, PaddedIsConstant) {
  for (WritePolicy p : {WritePolicy::write_through, WritePolicy::write_back}) {
    const MicroArchConfig c = arch(p);
    for (Mitigation mit : {Mitigation::basic_flush, Mitigation::full_flush, Mitigation::microreset}) {
      const Cycles pad = measure_worst_case_pad(c, FenceVariant{mit});
      EXPECT_EQ(spread(sweep(c, spec(AttackKind::cs_latency, mit, pad))), 0U) << to_string(mit);
    }
  }
}

TEST(ContextSwitchAttack, SameSecretSameTime) {
  const MicroArchConfig c = arch(WritePolicy::write_back);
  const AttackSpec s = spec(AttackKind::cs_latency, Mitigation::microreset);
  Machine a(c), b(c);
  EXPECT_EQ(run_cs_iteration(a, s, 0, 1), run_cs_iteration(b, s, 0, 1));
  EXPECT_EQ(run_cs_iteration(a, s, 0, 2), run_cs_iteration(a, s, 0, 3));
}

TEST(ContextSwitchAttack, UnderProvisionedPadThrowsOnFullyDirtyCache) {
  const MicroArchConfig c = arch(WritePolicy::write_back);
  const WorstCase w = measure_worst_case(c, FenceVariant{Mitigation::microreset});
  Machine m(c);
  const AttackSpec s = spec(AttackKind::cs_latency, Mitigation::microreset, w.worst_case_cycles - 1);
  EXPECT_NO_THROW(run_cs_iteration(m, s, 0, 1));
  EXPECT_THROW(run_cs_iteration(m, s, 255, 2), PadExceeded);
}

TEST(SwMitigation, MaskFollowsAttackedCache) {
  EXPECT_EQ(sw_prime_mask(AttackKind::l1d), kMaskL1D);
  EXPECT_EQ(sw_prime_mask(AttackKind::l1i), kMaskL1I);
  for (AttackKind k : {AttackKind::dtlb, AttackKind::btb, AttackKind::bht}) EXPECT_FALSE(sw_applicable(k));
  EXPECT_EQ(effective_variant(spec(AttackKind::l1i, Mitigation::sw_prime)).select_mask, kMaskL1I);
  EXPECT_EQ(effective_variant(spec(AttackKind::l1i, Mitigation::microreset)).select_mask, kMaskAll);
}

TEST(SwMitigation, CostLinearInRounds) {
  const MicroArchConfig c;
  for (unsigned r : {1U, 2U, 5U}) {
    EXPECT_EQ(gen_sw_mitigation(AttackKind::l1d, c, r).size(), r * c.l1d.lines());
    EXPECT_EQ(gen_sw_mitigation(AttackKind::l1i, c, r).size(), r * c.l1i.lines());
  }
  EXPECT_THROW(gen_sw_mitigation(AttackKind::l1d, c, 0), ContractViolation);
}

namespace {

// Trojan lines left in a 4-set, 8-way cache after `rounds` ascending kernel
// traversals, starting from LFSR state `phase`.
unsigned residual_trojan_lines(std::uint8_t phase, unsigned rounds) {
  const CacheGeometry g{4, 8, 16};
  SetAssocCache cache(g, WritePolicy::write_through);
  const std::uint64_t trojan = region_base(kTrojanDomain);
  const std::uint64_t kernel = region_base(kKernelDomain);
  for (unsigned i = 0; i < g.lines(); ++i) cache.access(trojan + i * g.line_bytes, false, kTrojanDomain);
  cache.set_lfsr(Lfsr8(phase));
  for (unsigned r = 0; r < rounds; ++r)
    for (unsigned i = 0; i < g.lines(); ++i) cache.access(kernel + i * g.line_bytes, false, kKernelDomain);
  unsigned left = 0;
  for (unsigned s = 0; s < g.sets; ++s)
    for (unsigned w = 0; w < g.ways; ++w) left += cache.line(s, w).valid && cache.line(s, w).domain == kTrojanDomain;
  return left;
}

}  // namespace

TEST(SwMitigation, OneRoundLeavesTrojanLinesForSomePhase) {
  unsigned phases_with_residue = 0;
  for (unsigned p = 1; p <= 255; ++p) phases_with_residue += residual_trojan_lines(static_cast<std::uint8_t>(p), 1) > 0;
  EXPECT_GE(phases_with_residue, 1U);
}

TEST(SwMitigation, MoreRoundsLeaveFewerLinesOnAverage) {
  double prev = 1e9;
  for (unsigned rounds : {1U, 2U, 4U, 8U}) {
    double total = 0;
    for (unsigned p = 1; p <= 255; ++p) total += residual_trojan_lines(static_cast<std::uint8_t>(p), rounds);
    const double mean = total / 255.0;
    EXPECT_LE(mean, prev) << rounds;
    prev = mean;
  }
}
