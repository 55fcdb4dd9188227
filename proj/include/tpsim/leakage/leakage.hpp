#ifndef TPSIM_LEAKAGE_LEAKAGE_HPP
#define TPSIM_LEAKAGE_LEAKAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "tpsim/errors.hpp"
#include "tpsim/rng.hpp"

namespace tpsim {

struct Sample {
  std::uint32_t secret = 0;
  std::uint64_t time = 0;
  friend constexpr bool operator==(const Sample&, const Sample&) = default;
};

struct SampleMeta {
  std::uint64_t seed = 0;
  std::uint64_t config_fingerprint = 0;
  std::string attack_kind;
  std::string mitigation;
  /// Declared secret range [0, secret_range); 0 when unknown.
  std::uint32_t secret_range = 0;
  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

struct SampleSet {
  std::vector<Sample> pairs;
  SampleMeta meta;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

/// Output binning. Unset width is the identity.
struct BinStrategy {
  std::optional<std::uint64_t> width;
};

inline SampleSet bin_times(const SampleSet& s, BinStrategy strategy = {}) {
  if (s.empty()) throw EmptySamples();
  if (!strategy.width) return s;
  if (*strategy.width == 0) throw InvalidBinWidth();
  SampleSet out = s;
  for (Sample& p : out.pairs) p.time /= *strategy.width;
  return out;
}

/// p(t|s), outputs (time bins) along rows, inputs (secrets) along columns.
struct ChannelMatrix {
  std::vector<std::uint32_t> secret_values;
  std::vector<std::uint64_t> time_bins;
  std::vector<double> p;  // row-major: p[bin * secrets + secret]

  std::size_t rows() const noexcept { return time_bins.size(); }
  std::size_t cols() const noexcept { return secret_values.size(); }
  bool empty() const noexcept { return p.empty(); }
  double at(std::size_t bin, std::size_t secret) const { return p.at(bin * cols() + secret); }
  double& at(std::size_t bin, std::size_t secret) { return p.at(bin * cols() + secret); }
};

namespace detail {

/// Dense re-indexing of one column.
template <class T>
struct DenseColumn {
  std::vector<T> values;           // sorted distinct
  std::vector<std::uint32_t> idx;  // per sample
  std::vector<std::uint32_t> count;
};

template <class T, class Get>
DenseColumn<T> densify(const std::vector<Sample>& pairs, Get get) {
  DenseColumn<T> d;
  d.values.reserve(pairs.size());
  for (const Sample& s : pairs) d.values.push_back(get(s));
  std::sort(d.values.begin(), d.values.end());
  d.values.erase(std::unique(d.values.begin(), d.values.end()), d.values.end());
  d.idx.reserve(pairs.size());
  d.count.assign(d.values.size(), 0);
  for (const Sample& s : pairs) {
    const auto i = static_cast<std::uint32_t>(
        std::lower_bound(d.values.begin(), d.values.end(), get(s)) - d.values.begin());
    d.idx.push_back(i);
    ++d.count[i];
  }
  return d;
}

/// Pre-indexed samples: sample order grouped by secret, so the joint
/// histogram of any time permutation is one linear pass.
class MiKernel {
 public:
  explicit MiKernel(const SampleSet& s)
      : secrets_(densify<std::uint32_t>(s.pairs, [](const Sample& x) { return x.secret; })),
        times_(densify<std::uint64_t>(s.pairs, [](const Sample& x) { return x.time; })),
        n_(s.size()) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0U);
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return secrets_.idx[a] < secrets_.idx[b]; });
  }

  const std::vector<std::uint32_t>& time_index() const noexcept { return times_.idx; }
  std::size_t n() const noexcept { return n_; }
  std::size_t distinct_secrets() const noexcept { return secrets_.values.size(); }
  std::size_t distinct_times() const noexcept { return times_.values.size(); }

  /// MI in bits with sample i's time index replaced by tidx[i].
  double bits(const std::vector<std::uint32_t>& tidx, std::vector<std::uint32_t>& scratch,
              std::vector<std::uint32_t>& touched) const {
    scratch.assign(times_.values.size(), 0);
    const double n = static_cast<double>(n_);
    double mi = 0.0;
    std::size_t pos = 0;
    while (pos < n_) {
      const std::uint32_t sidx = secrets_.idx[order_[pos]];
      const double ns = secrets_.count[sidx];
      touched.clear();
      for (; pos < n_ && secrets_.idx[order_[pos]] == sidx; ++pos) {
        const std::uint32_t t = tidx[order_[pos]];
        if (scratch[t]++ == 0) touched.push_back(t);
      }
      for (std::uint32_t t : touched) {
        const double nst = scratch[t];
        const double nt = times_.count[t];
        mi += nst / n * std::log2(nst * n / (ns * nt));
        scratch[t] = 0;
      }
    }
    return std::max(0.0, mi);
  }

 private:
  DenseColumn<std::uint32_t> secrets_;
  DenseColumn<std::uint64_t> times_;
  std::vector<std::uint32_t> order_;
  std::size_t n_;
};

}  // namespace detail

inline ChannelMatrix channel_matrix(const SampleSet& s) {
  if (s.empty()) throw EmptySamples();
  const auto sec = detail::densify<std::uint32_t>(s.pairs, [](const Sample& x) { return x.secret; });
  const auto tim = detail::densify<std::uint64_t>(s.pairs, [](const Sample& x) { return x.time; });
  ChannelMatrix m;
  m.secret_values = sec.values;
  m.time_bins = tim.values;
  m.p.assign(m.rows() * m.cols(), 0.0);
  std::vector<std::uint64_t> joint(m.rows() * m.cols(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) ++joint[tim.idx[i] * m.cols() + sec.idx[i]];
  for (std::size_t b = 0; b < m.rows(); ++b)
    for (std::size_t c = 0; c < m.cols(); ++c)
      m.at(b, c) = static_cast<double>(joint[b * m.cols() + c]) / sec.count[c];
  return m;
}

/// Plug-in mutual information in millibits.
inline double mutual_information(const SampleSet& s) {
  if (s.empty()) throw EmptySamples();
  const detail::MiKernel k(s);
  std::vector<std::uint32_t> scratch, touched;
  return 1000.0 * k.bits(k.time_index(), scratch, touched);
}

struct ZeroLeakageOptions {
  std::size_t trials = 1000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

/// MI of every shuffled trial, in trial order. Trial t shuffles with the
/// stream (seed, t), so results do not depend on `jobs`.
inline std::vector<double> shuffled_mi_trials(const SampleSet& s, const ZeroLeakageOptions& opt) {
  if (s.empty()) throw EmptySamples();
  if (opt.trials == 0) throw InvalidTrials();
  if (s.size() < 2) throw ContractViolation("zero-leakage bound needs n >= 2");
  const detail::MiKernel k(s);
  std::vector<double> out(opt.trials, 0.0);
  auto worker = [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> perm, scratch, touched;
    for (std::size_t t = begin; t < end; ++t) {
      perm = k.time_index();
      CounterRng rng(opt.seed, 0x4d30, t);
      shuffle_in_place(std::span<std::uint32_t>(perm), rng);
      out[t] = 1000.0 * k.bits(perm, scratch, touched);
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(opt.jobs, 1, opt.trials);
  if (jobs == 1) {
    worker(0, opt.trials);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (opt.trials + jobs - 1) / jobs;
    for (std::size_t b = 0; b < opt.trials; b += chunk)
      pool.emplace_back(worker, b, std::min(opt.trials, b + chunk));
    for (auto& th : pool) th.join();
  }
  return out;
}

/// Nearest-rank percentile of `values` (copied and sorted).
inline double nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) throw EmptySamples();
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

inline double zero_leakage_bound(const SampleSet& s, const ZeroLeakageOptions& opt = {}) {
  return nearest_rank(shuffled_mi_trials(s, opt), opt.confidence);
}

enum class Verdict : std::uint8_t { channel, consistent_with_no_channel };

inline std::string_view to_string(Verdict v) noexcept {
  return v == Verdict::channel ? "channel" : "consistent_with_no_channel";
}

struct LeakageReport {
  double m_mb = 0.0;
  /// Unset when n < 2: no shuffle is possible.
  std::optional<double> m0_mb;
  std::size_t n = 0;
  std::size_t trials = 0;
  Verdict verdict = Verdict::consistent_with_no_channel;
};

inline Verdict decide(double m_mb, std::optional<double> m0_mb) noexcept {
  return m0_mb && m_mb > *m0_mb ? Verdict::channel : Verdict::consistent_with_no_channel;
}

inline LeakageReport analyze(const SampleSet& s, const ZeroLeakageOptions& opt = {}) {
  if (s.empty()) throw EmptySamples();
  if (opt.trials == 0) throw InvalidTrials();
  LeakageReport r;
  r.n = s.size();
  r.trials = opt.trials;
  r.m_mb = mutual_information(s);
  if (s.size() >= 2) r.m0_mb = zero_leakage_bound(s, opt);
  r.verdict = decide(r.m_mb, r.m0_mb);
  return r;
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either column is constant.
inline double spearman(const SampleSet& s) {
  if (s.empty()) throw EmptySamples();
  auto ranks = [&](auto get) {
    const std::size_t n = s.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0U);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return get(s.pairs[a]) < get(s.pairs[b]); });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && get(s.pairs[order[j + 1]]) == get(s.pairs[order[i]])) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks([](const Sample& x) { return static_cast<std::uint64_t>(x.secret); });
  const auto ry = ranks([](const Sample& x) { return x.time; });
  const double n = static_cast<double>(s.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace tpsim

#endif  // TPSIM_LEAKAGE_LEAKAGE_HPP
