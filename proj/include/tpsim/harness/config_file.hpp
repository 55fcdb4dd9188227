#ifndef TPSIM_HARNESS_CONFIG_FILE_HPP
#define TPSIM_HARNESS_CONFIG_FILE_HPP

#include <cctype>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

#include "tpsim/attacks/attack.hpp"
#include "tpsim/errors.hpp"
#include "tpsim/machine/config.hpp"
#include "tpsim/uarch/serialize.hpp"

namespace tpsim {

struct ExperimentConfig {
  MicroArchConfig arch{};
  AttackSpec attack{};
  /// Unset means "auto": measured worst case for fence.t variants, 0 otherwise.
  std::optional<Cycles> pad;
  std::size_t n_samples = 10'000;
  std::uint64_t seed = 1;
  std::size_t m0_trials = 1000;
  std::string output_dir = "out";
  std::optional<std::uint64_t> bin_width;
};

using ConfigValue = std::variant<std::uint64_t, std::string>;

/// One `key = value` line. Values are non-negative integers or
/// double-quoted strings; `#` starts a comment outside quotes.
struct ConfigEntry {
  std::string key;
  ConfigValue value;
  std::size_t line = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
          c == '_' || c == '.'))
      return false;
  return k.front() != '.' && k.back() != '.' && k.find("..") == std::string_view::npos;
}

inline ConfigEntry parse_line(std::string_view raw, std::size_t lineno) {
  const auto eq = raw.find('=');
  if (eq == std::string_view::npos) throw ParseError(lineno, "expected 'key = value'");
  ConfigEntry e;
  e.line = lineno;
  e.key = std::string(trim(raw.substr(0, eq)));
  if (!valid_key(e.key)) throw ParseError(lineno, "malformed key '" + e.key + "'");
  std::string_view v = trim(raw.substr(eq + 1));
  if (v.empty()) throw ParseError(lineno, "missing value");
  if (v.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < v.size() && v[i] != '"'; ++i) {
      if (v[i] == '\\') {
        if (++i == v.size()) break;
        if (v[i] != '"' && v[i] != '\\') throw ParseError(lineno, "unknown escape");
      }
      out.push_back(v[i]);
    }
    if (i >= v.size()) throw ParseError(lineno, "unterminated string");
    const std::string_view rest = trim(v.substr(i + 1));
    if (!rest.empty() && rest.front() != '#') throw ParseError(lineno, "trailing characters");
    e.value = out;
    return e;
  }
  if (const auto hash = v.find('#'); hash != std::string_view::npos) v = trim(v.substr(0, hash));
  std::uint64_t n = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ParseError(lineno, "value must be a non-negative integer or a quoted string");
  e.value = n;
  return e;
}

}  // namespace detail

inline std::vector<ConfigEntry> parse_config_entries(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string_view t = detail::trim(line);
    if (!t.empty() && t.front() != '#') out.push_back(detail::parse_line(t, lineno));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

namespace detail {

inline std::uint64_t as_int(const ConfigEntry& e) {
  if (const auto* n = std::get_if<std::uint64_t>(&e.value)) return *n;
  throw SchemaError(e.key, "expected an integer");
}

inline const std::string& as_str(const ConfigEntry& e) {
  if (const auto* s = std::get_if<std::string>(&e.value)) return *s;
  throw SchemaError(e.key, "expected a quoted string");
}

inline bool as_flag(const ConfigEntry& e) {
  if (const auto* n = std::get_if<std::uint64_t>(&e.value)) {
    if (*n <= 1) return *n == 1;
  } else if (const auto& s = std::get<std::string>(e.value); s == "true" || s == "false") {
    return s == "true";
  }
  throw SchemaError(e.key, "expected 0, 1, \"true\" or \"false\"");
}

inline unsigned as_u32(const ConfigEntry& e) {
  const std::uint64_t n = as_int(e);
  if (n > 0xFFFF'FFFFULL) throw SchemaError(e.key, "value exceeds 32 bits");
  return static_cast<unsigned>(n);
}

using Setter = std::function<void(ExperimentConfig&, const ConfigEntry&)>;

inline const std::map<std::string, Setter, std::less<>>& config_schema() {
  static const std::map<std::string, Setter, std::less<>> schema = [] {
    std::map<std::string, Setter, std::less<>> m;
    auto latency = [&](const char* key, Cycles Latencies::*field) {
      m[std::string("latency.") + key] = [field](ExperimentConfig& c, const ConfigEntry& e) {
        c.arch.lat.*field = as_int(e);
      };
    };
    latency("t_hit", &Latencies::t_hit);
    latency("t_miss", &Latencies::t_miss);
    latency("t_wb_per_line", &Latencies::t_wb_per_line);
    latency("t_mispredict", &Latencies::t_mispredict);
    latency("t_tlb_miss", &Latencies::t_tlb_miss);
    latency("t_pipeline_flush", &Latencies::t_pipeline_flush);
    latency("t_fence_drain", &Latencies::t_fence_drain);
    latency("t_microreset_assert", &Latencies::t_microreset_assert);
    auto kernel = [&](const char* key, Cycles KernelCosts::*field) {
      m[std::string("kernel.") + key] = [field](ExperimentConfig& c, const ConfigEntry& e) {
        c.arch.kernel.*field = as_int(e);
      };
    };
    kernel("clint_reconfig", &KernelCosts::clint_reconfig);
    kernel("schedule", &KernelCosts::schedule);
    kernel("thread_switch", &KernelCosts::thread_switch);

    m["l1d.policy"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      const auto p = parse_write_policy(as_str(e));
      if (!p) throw SchemaError(e.key, "expected \"write_through\" or \"write_back\"");
      c.arch.l1d_policy = *p;
    };
    m["l1d.miss_handler_trace"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      c.arch.miss_handler_trace = as_flag(e);
    };
    m["pin_secondary"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      c.arch.pin_secondary = as_flag(e);
    };
    m["attack.kind"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      const auto k = parse_attack_kind(as_str(e));
      if (!k) throw SchemaError(e.key, "unknown attack kind");
      c.attack.kind = *k;
    };
    m["attack.mitigation"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      const auto v = parse_mitigation(as_str(e));
      if (!v) throw SchemaError(e.key, "unknown mitigation");
      c.attack.mitigation.kind = *v;
    };
    m["attack.select_mask"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      const unsigned mask = as_u32(e);
      try {
        validate_mask(mask);
      } catch (const InvalidMask&) {
        throw SchemaError(e.key, "reserved select_mask bits set");
      }
      c.attack.mitigation.select_mask = mask;
    };
    m["attack.sw_rounds"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      const unsigned r = as_u32(e);
      if (r == 0) throw SchemaError(e.key, "must be >= 1");
      c.attack.mitigation.sw_rounds = r;
    };
    m["attack.slice_cycles"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      c.attack.slice_cycles = as_int(e);
    };
    auto pad = [](ExperimentConfig& c, const ConfigEntry& e) {
      if (const auto* s = std::get_if<std::string>(&e.value)) {
        if (*s != "auto") throw SchemaError(e.key, "expected an integer or \"auto\"");
        c.pad.reset();
        return;
      }
      c.pad = as_u32(e);
    };
    m["attack.pad"] = pad;
    m["pad"] = pad;
    m["n_samples"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      const std::uint64_t n = as_int(e);
      if (n == 0) throw SchemaError(e.key, "must be >= 1");
      c.n_samples = n;
    };
    m["seed"] = [](ExperimentConfig& c, const ConfigEntry& e) { c.seed = as_int(e); };
    m["m0.trials"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      const std::uint64_t n = as_int(e);
      if (n == 0) throw SchemaError(e.key, "must be >= 1");
      c.m0_trials = n;
    };
    m["output_dir"] = [](ExperimentConfig& c, const ConfigEntry& e) { c.output_dir = as_str(e); };
    m["analysis.bin_width"] = [](ExperimentConfig& c, const ConfigEntry& e) {
      const std::uint64_t w = as_int(e);
      if (w == 0) throw SchemaError(e.key, "bin width must be >= 1");
      c.bin_width = w;
    };
    return m;
  }();
  return schema;
}

}  // namespace detail

/// Parses a config document; absent keys keep their defaults.
inline ExperimentConfig load_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<std::string, std::size_t, std::less<>> seen;
  for (const ConfigEntry& e : parse_config_entries(text)) {
    const auto it = detail::config_schema().find(e.key);
    if (it == detail::config_schema().end()) throw SchemaError(e.key, "unknown key");
    const std::string canonical = e.key == "pad" ? "attack.pad" : e.key;
    if (!seen.emplace(canonical, e.line).second) throw SchemaError(e.key, "duplicate key");
    it->second(cfg, e);
  }
  try {
    cfg.arch.validate();
  } catch (const ContractViolation& ex) {
    throw SchemaError("latency", ex.what());
  }
  return cfg;
}

/// Canonical text of everything that shapes the samples, except the seed.
inline std::string canonical_config_text(const ExperimentConfig& c) {
  std::ostringstream o;
  const MicroArchConfig& a = c.arch;
  o << "l1d=" << a.l1d.sets << 'x' << a.l1d.ways << 'x' << a.l1d.line_bytes << '\n'
    << "l1d.policy=" << to_string(a.l1d_policy) << '\n'
    << "l1i=" << a.l1i.sets << 'x' << a.l1i.ways << 'x' << a.l1i.line_bytes << '\n'
    << "l1d.miss_handler_trace=" << a.miss_handler_trace_enabled() << '\n'
    << "pin_secondary=" << a.pin_secondary << '\n'
    << "latency=" << a.lat.t_hit << ',' << a.lat.t_miss << ',' << a.lat.t_wb_per_line << ','
    << a.lat.t_mispredict << ',' << a.lat.t_tlb_miss << ',' << a.lat.t_pipeline_flush << ','
    << a.lat.t_fence_drain << ',' << a.lat.t_microreset_assert << '\n'
    << "kernel=" << a.kernel.clint_reconfig << ',' << a.kernel.schedule << ','
    << a.kernel.thread_switch << '\n'
    << "attack.kind=" << to_string(c.attack.kind) << '\n'
    << "attack.mitigation=" << to_string(c.attack.mitigation.kind) << '\n'
    << "attack.select_mask=" << c.attack.mitigation.select_mask << '\n'
    << "attack.sw_rounds=" << c.attack.mitigation.sw_rounds << '\n'
    << "attack.slice_cycles=" << c.attack.slice_cycles << '\n'
    << "attack.pad=" << (c.pad ? std::to_string(*c.pad) : std::string("auto")) << '\n'
    << "n_samples=" << c.n_samples << '\n'
    << "m0.trials=" << c.m0_trials << '\n'
    << "analysis.bin_width=" << (c.bin_width ? std::to_string(*c.bin_width) : std::string("identity"))
    << '\n';
  return o.str();
}

inline std::uint64_t config_fingerprint(const ExperimentConfig& c) {
  return fnv1a64(canonical_config_text(c));
}

}  // namespace tpsim

#endif  // TPSIM_HARNESS_CONFIG_FILE_HPP
