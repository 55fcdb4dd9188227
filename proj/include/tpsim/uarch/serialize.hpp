#ifndef TPSIM_UARCH_SERIALIZE_HPP
#define TPSIM_UARCH_SERIALIZE_HPP

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace tpsim {

/// Append-only little-endian byte buffer used for canonical state
/// serialization. Fixed widths only, never pointers or padding.
class ByteSink {
 public:
  void put_u8(std::uint8_t v) { bytes_.push_back(v); }
  void put_u16(std::uint16_t v) { put_le(v, 2); }
  void put_u32(std::uint32_t v) { put_le(v, 4); }
  void put_u64(std::uint64_t v) { put_le(v, 8); }
  void put_bool(bool v) { put_u8(v ? 1 : 0); }
  void put_tag(std::string_view name) {
    put_u32(static_cast<std::uint32_t>(name.size()));
    for (char c : name) put_u8(static_cast<std::uint8_t>(c));
  }

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  void clear() noexcept { bytes_.clear(); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> bytes_;
};

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::span<const std::uint8_t> data,
                                std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t fnv1a64(std::string_view text,
                                std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (char c : text) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tpsim

#endif  // TPSIM_UARCH_SERIALIZE_HPP
