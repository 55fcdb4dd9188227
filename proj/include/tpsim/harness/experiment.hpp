#ifndef TPSIM_HARNESS_EXPERIMENT_HPP
#define TPSIM_HARNESS_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "tpsim/attacks/attack.hpp"
#include "tpsim/harness/config_file.hpp"
#include "tpsim/harness/io.hpp"
#include "tpsim/leakage/leakage.hpp"
#include "tpsim/rng.hpp"

namespace tpsim {

/// Iterations per block. Each block gets its own machine, so the samples do
/// not depend on how blocks are spread over workers.
inline constexpr std::size_t kBlockIterations = 1000;

// Stream ids under the experiment seed.
inline constexpr std::uint64_t kSecretStream = 1;
inline constexpr std::uint64_t kIterationStream = 2;
inline constexpr std::uint64_t kWarmupStream = 3;

inline std::uint32_t iteration_secret(std::uint64_t seed, std::size_t i, std::uint32_t range) {
  CounterRng r(seed, kSecretStream, i);
  return static_cast<std::uint32_t>(r.below(range));
}

inline std::uint64_t iteration_seed(std::uint64_t seed, std::size_t i) {
  return CounterRng(seed, kIterationStream, i).at(0);
}

/// Pad to run with: explicit value, else the measured worst case for
/// fence.t variants and 0 for the rest.
inline Cycles resolve_pad(const ExperimentConfig& c) {
  if (c.pad) return *c.pad;
  if (!is_fence_t(c.attack.mitigation.kind)) return 0;
  return measure_worst_case_pad(c.arch, effective_variant(c.attack));
}

struct ExperimentResult {
  SampleSet samples;
  ChannelMatrix matrix;
  LeakageReport report;
  Cycles pad = 0;
  std::uint64_t seed = 0;
  std::uint64_t fingerprint = 0;
  ExperimentConfig config;
};

namespace detail {

/// Runs iterations [begin, end) on a fresh machine after one warm-up
/// iteration. PadExceeded is re-raised with the global iteration index.
inline void run_block(const ExperimentConfig& c, const AttackSpec& spec, std::size_t block,
                      std::size_t begin, std::size_t end, std::vector<Sample>& out) {
  Machine m(c.arch, kSpyDomain);
  const std::uint32_t range = secret_range(spec.kind, c.arch);
  const bool cs = spec.kind == AttackKind::cs_latency;
  const Workload prime = cs ? Workload{} : gen_prime(spec.kind, c.arch);
  auto once = [&](std::uint32_t secret, std::uint64_t iseed) {
    return cs ? run_cs_iteration(m, spec, secret, iseed) : run_pp_iteration(m, spec, secret, iseed, &prime);
  };
  try {
    once(0, CounterRng(c.seed, kWarmupStream, block).at(0));
  } catch (const PadExceeded& e) {
    throw e.at_iteration(begin);
  }
  for (std::size_t i = begin; i < end; ++i) {
    const std::uint32_t secret = iteration_secret(c.seed, i, range);
    try {
      out[i] = {secret, once(secret, iteration_seed(c.seed, i))};
    } catch (const PadExceeded& e) {
      throw e.at_iteration(i);
    }
  }
}

}  // namespace detail

/// Collects the samples only. Output is identical for every `jobs`.
inline SampleSet collect_samples(const ExperimentConfig& c, Cycles pad, unsigned jobs = 1) {
  if (c.n_samples == 0) throw ContractViolation("n_samples must be >= 1");
  c.arch.validate();
  AttackSpec spec = c.attack;
  spec.pad = pad;
  validate_mask(effective_variant(spec).select_mask);

  const std::size_t n = c.n_samples;
  const std::size_t blocks = (n + kBlockIterations - 1) / kBlockIterations;
  std::vector<Sample> pairs(n);
  std::vector<std::exception_ptr> errors(blocks);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> first_error{blocks};

  auto worker = [&] {
    for (std::size_t b; (b = next.fetch_add(1)) < blocks;) {
      if (b > first_error.load()) continue;
      try {
        detail::run_block(c, spec, b, b * kBlockIterations, std::min(n, (b + 1) * kBlockIterations), pairs);
      } catch (...) {
        errors[b] = std::current_exception();
        for (std::size_t cur = first_error.load(); b < cur && !first_error.compare_exchange_weak(cur, b);) {
        }
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, blocks);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  SampleSet s;
  s.pairs = std::move(pairs);
  s.meta.seed = c.seed;
  s.meta.config_fingerprint = config_fingerprint(c);
  s.meta.attack_kind = std::string(to_string(c.attack.kind));
  s.meta.mitigation = std::string(to_string(c.attack.mitigation.kind));
  s.meta.secret_range = secret_range(c.attack.kind, c.arch);
  return s;
}

/// Channel matrix and leakage report over the (optionally binned) samples.
inline std::pair<ChannelMatrix, LeakageReport> analyze_samples(const SampleSet& s, std::optional<std::uint64_t> bin_width,
                                                               std::size_t trials, std::uint64_t seed,
                                                               unsigned jobs = 1) {
  const SampleSet binned = bin_times(s, {bin_width});
  ZeroLeakageOptions opt;
  opt.trials = trials;
  opt.seed = seed;
  opt.jobs = std::max(1U, jobs);
  return {channel_matrix(binned), analyze(binned, opt)};
}

inline ExperimentResult run_experiment(const ExperimentConfig& c, unsigned jobs = 1) {
  ExperimentResult r;
  r.config = c;
  r.seed = c.seed;
  r.fingerprint = config_fingerprint(c);
  r.pad = resolve_pad(c);
  r.samples = collect_samples(c, r.pad, jobs);
  auto [matrix, report] = analyze_samples(r.samples, c.bin_width, c.m0_trials, c.seed, jobs);
  r.matrix = std::move(matrix);
  r.report = report;
  return r;
}

inline std::string fingerprint_hex(std::uint64_t f) {
  char buf[17];
  static constexpr char kHex[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i, f >>= 4) buf[i] = kHex[f & 0xF];
  return std::string(buf, 16);
}

inline nlohmann::ordered_json report_json(const LeakageReport& r, std::uint64_t seed,
                                          std::optional<std::uint64_t> fingerprint) {
  nlohmann::ordered_json j;
  j["m_mb"] = r.m_mb;
  j["m0_mb"] = r.m0_mb ? nlohmann::ordered_json(*r.m0_mb) : nlohmann::ordered_json(nullptr);
  j["n"] = r.n;
  j["trials"] = r.trials;
  j["verdict"] = std::string(to_string(r.verdict));
  j["seed"] = seed;
  j["config_fingerprint"] = fingerprint ? nlohmann::ordered_json(fingerprint_hex(*fingerprint))
                                        : nlohmann::ordered_json(nullptr);
  return j;
}

inline nlohmann::ordered_json report_json(const ExperimentResult& r) {
  auto j = report_json(r.report, r.seed, r.fingerprint);
  j["attack"] = std::string(to_string(r.config.attack.kind));
  j["mitigation"] = std::string(to_string(r.config.attack.mitigation.kind));
  j["l1d_policy"] = std::string(to_string(r.config.arch.l1d_policy));
  j["pad_cycles"] = r.pad;
  return j;
}

inline std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

/// samples.csv, matrix.csv, report.json and heatmap.ppm under `dir`.
inline void write_artifacts(const ExperimentResult& r, const std::filesystem::path& dir) {
  write_samples_csv(r.samples, dir / "samples.csv");
  write_matrix_csv(r.matrix, dir / "matrix.csv");
  write_file_atomic(dir / "report.json", json_text(report_json(r)));
  render_heatmap(r.matrix, dir / "heatmap.ppm");
}

}  // namespace tpsim

#endif  // TPSIM_HARNESS_EXPERIMENT_HPP
