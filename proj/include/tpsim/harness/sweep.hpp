#ifndef TPSIM_HARNESS_SWEEP_HPP
#define TPSIM_HARNESS_SWEEP_HPP

#include <array>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tpsim/harness/experiment.hpp"

namespace tpsim {

inline constexpr std::array<Mitigation, 5> kSweepMitigations{
    Mitigation::none, Mitigation::sw_prime, Mitigation::basic_flush, Mitigation::full_flush,
    Mitigation::microreset};
inline constexpr std::array<WritePolicy, 2> kSweepPolicies{WritePolicy::write_through,
                                                           WritePolicy::write_back};

struct SweepCell {
  AttackKind kind = AttackKind::l1d;
  Mitigation mitigation = Mitigation::none;
  WritePolicy policy = WritePolicy::write_through;
  Cycles pad = 0;
  /// Unset for combinations that do not apply (software priming of
  /// components software cannot reach).
  std::optional<LeakageReport> report;
};

/// The experiment one sweep cell runs: `base` with the cell's kind,
/// mitigation and policy, and an automatic pad.
inline ExperimentConfig sweep_cell_config(const ExperimentConfig& base, AttackKind kind, Mitigation mit,
                                          WritePolicy policy) {
  ExperimentConfig c = base;
  c.attack.kind = kind;
  c.attack.mitigation.kind = mit;
  c.arch.l1d_policy = policy;
  c.pad.reset();
  return c;
}

using SweepProgress = std::function<void(const SweepCell&)>;

inline std::vector<SweepCell> run_sweep(const ExperimentConfig& base, unsigned jobs = 1,
                                        const SweepProgress& progress = {}) {
  std::vector<SweepCell> cells;
  for (AttackKind kind : kPrimeProbeKinds)
    for (WritePolicy policy : kSweepPolicies)
      for (Mitigation mit : kSweepMitigations) {
        SweepCell cell{kind, mit, policy, 0, std::nullopt};
        if (mit != Mitigation::sw_prime || sw_applicable(kind)) {
          const ExperimentResult r = run_experiment(sweep_cell_config(base, kind, mit, policy), jobs);
          cell.pad = r.pad;
          cell.report = r.report;
        }
        if (progress) progress(cell);
        cells.push_back(cell);
      }
  return cells;
}

/// One row per (kind, policy), one column per mitigation; each cell is
/// "M / M0" with a '*' on channel verdicts.
inline std::string sweep_table(const std::vector<SweepCell>& cells) {
  auto fmt = [](const SweepCell& c) -> std::string {
    if (!c.report) return "n/a";
    char buf[64];
    if (c.report->m0_mb)
      std::snprintf(buf, sizeof buf, "%.1f / %.1f%s", c.report->m_mb, *c.report->m0_mb,
                    c.report->verdict == Verdict::channel ? "*" : "");
    else
      std::snprintf(buf, sizeof buf, "%.1f / -", c.report->m_mb);
    return buf;
  };
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  constexpr std::size_t kFirst = 20, kCol = 22;
  std::string out = pad("attack/policy", kFirst);
  for (Mitigation m : kSweepMitigations) out += pad(std::string(to_string(m)), kCol);
  out += '\n';
  for (std::size_t i = 0; i + kSweepMitigations.size() <= cells.size(); i += kSweepMitigations.size()) {
    out += pad(std::string(to_string(cells[i].kind)) + " " + std::string(to_string(cells[i].policy)), kFirst);
    for (std::size_t j = 0; j < kSweepMitigations.size(); ++j) out += pad(fmt(cells[i + j]), kCol);
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
  out += "cells: M / M0 in millibits, * = channel\n";
  return out;
}

inline nlohmann::ordered_json sweep_json(const std::vector<SweepCell>& cells, std::uint64_t seed) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const SweepCell& c : cells) {
    nlohmann::ordered_json j;
    j["attack"] = std::string(to_string(c.kind));
    j["mitigation"] = std::string(to_string(c.mitigation));
    j["l1d_policy"] = std::string(to_string(c.policy));
    if (c.report) {
      j.update(report_json(*c.report, seed, std::nullopt));
      j.erase("config_fingerprint");
      j["pad_cycles"] = c.pad;
    } else {
      j["verdict"] = "n/a";
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace tpsim

#endif  // TPSIM_HARNESS_SWEEP_HPP
