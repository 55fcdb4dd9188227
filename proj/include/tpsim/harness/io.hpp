#ifndef TPSIM_HARNESS_IO_HPP
#define TPSIM_HARNESS_IO_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tpsim/errors.hpp"
#include "tpsim/harness/viridis.hpp"
#include "tpsim/leakage/leakage.hpp"

namespace tpsim {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(path.string(), "read failed");
  return ss.str();
}

/// Writes to a sibling temp file, then renames over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path().string(), ec.message());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string(), "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError(tmp.string(), "write failed");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError(path.string(), ec.message());
  }
}

/// Shortest decimal that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string samples_csv(const SampleSet& s) {
  std::string out = "iteration,secret,time_cycles\n";
  out.reserve(out.size() + s.size() * 24);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += std::to_string(s.pairs[i].secret);
    out += ',';
    out += std::to_string(s.pairs[i].time);
    out += '\n';
  }
  return out;
}

inline void write_samples_csv(const SampleSet& s, const std::filesystem::path& path) {
  write_file_atomic(path, samples_csv(s));
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto c = line.find(sep, pos);
    out.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) return out;
    pos = c + 1;
  }
}

template <class T>
T parse_number(std::string_view s, const std::string& where) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw IoError(where, "malformed number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> csv_lines(std::string_view text, const std::string& where) {
  if (text.empty() || text.back() != '\n') throw IoError(where, "file must end with a single LF");
  text.remove_suffix(1);
  auto lines = split(text, '\n');
  for (auto l : lines)
    if (l.empty()) throw IoError(where, "blank line");
  return lines;
}

}  // namespace detail

inline SampleSet parse_samples_csv(std::string_view text, const std::string& where = "<samples>") {
  const auto lines = detail::csv_lines(text, where);
  if (lines.front() != "iteration,secret,time_cycles") throw IoError(where, "unexpected header");
  SampleSet s;
  s.pairs.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = detail::split(lines[i], ',');
    const std::string at = where + ":" + std::to_string(i + 1);
    if (f.size() != 3) throw IoError(at, "expected 3 fields");
    if (detail::parse_number<std::uint64_t>(f[0], at) != i - 1) throw IoError(at, "iteration out of order");
    s.pairs.push_back({detail::parse_number<std::uint32_t>(f[1], at),
                       detail::parse_number<std::uint64_t>(f[2], at)});
  }
  return s;
}

inline SampleSet read_samples_csv(const std::filesystem::path& path) {
  return parse_samples_csv(read_text_file(path), path.string());
}

inline std::string matrix_csv(const ChannelMatrix& m) {
  std::string out = "bin";
  for (auto s : m.secret_values) out += ',' + std::to_string(s);
  out += '\n';
  for (std::size_t b = 0; b < m.rows(); ++b) {
    out += std::to_string(m.time_bins[b]);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out += ',';
      out += format_double(m.at(b, c));
    }
    out += '\n';
  }
  return out;
}

inline void write_matrix_csv(const ChannelMatrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, matrix_csv(m));
}

inline ChannelMatrix parse_matrix_csv(std::string_view text, const std::string& where = "<matrix>") {
  const auto lines = detail::csv_lines(text, where);
  const auto head = detail::split(lines.front(), ',');
  if (head.front() != "bin") throw IoError(where, "unexpected header");
  ChannelMatrix m;
  for (std::size_t i = 1; i < head.size(); ++i)
    m.secret_values.push_back(detail::parse_number<std::uint32_t>(head[i], where + ":1"));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string at = where + ":" + std::to_string(r + 1);
    const auto f = detail::split(lines[r], ',');
    if (f.size() != head.size()) throw IoError(at, "row width differs from header");
    m.time_bins.push_back(detail::parse_number<std::uint64_t>(f[0], at));
    for (std::size_t c = 1; c < f.size(); ++c) {
      const double p = detail::parse_number<double>(f[c], at);
      if (!(p >= 0.0 && p <= 1.0)) throw IoError(at, "probability outside [0,1]");
      m.p.push_back(p);
    }
  }
  return m;
}

inline ChannelMatrix read_matrix_csv(const std::filesystem::path& path) {
  return parse_matrix_csv(read_text_file(path), path.string());
}

/// Log ramp: p in [1e-4, 1] spans the palette, p = 0 is the darkest entry.
inline constexpr double kHeatmapFloor = 1e-4;

inline std::size_t heatmap_index(double p) {
  if (!(p > 0.0)) return 0;
  const double lo = std::log10(kHeatmapFloor);
  const double v = (std::log10(std::max(p, kHeatmapFloor)) - lo) / -lo;
  const auto i = static_cast<std::size_t>(std::lround(std::min(v, 1.0) * 255.0));
  return std::max<std::size_t>(i, 1);
}

/// Binary PPM: one pixel per cell, secrets left to right, largest bin on
/// the top row.
inline std::string heatmap_ppm(const ChannelMatrix& m) {
  if (m.empty()) throw EmptyMatrix();
  std::string out = "P6\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
  for (std::size_t row = 0; row < m.rows(); ++row) {
    const std::size_t b = m.rows() - 1 - row;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const Rgb px = kViridis[heatmap_index(m.at(b, c))];
      out += static_cast<char>(px.r);
      out += static_cast<char>(px.g);
      out += static_cast<char>(px.b);
    }
  }
  return out;
}

inline void render_heatmap(const ChannelMatrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, heatmap_ppm(m));
}

}  // namespace tpsim

#endif  // TPSIM_HARNESS_IO_HPP
