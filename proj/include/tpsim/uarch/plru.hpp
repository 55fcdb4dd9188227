#ifndef TPSIM_UARCH_PLRU_HPP
#define TPSIM_UARCH_PLRU_HPP

#include <array>
#include <bit>
#include <cstdint>

#include "tpsim/errors.hpp"
#include "tpsim/uarch/serialize.hpp"

namespace tpsim {

/// Tree pseudo-LRU over `Ways` leaves. Nodes are stored heap-ordered
/// (children of node i are 2i+1 and 2i+2); leaf index Ways-1+w is way w.
/// A node flag of 0 means the victim search descends left.
template <unsigned Ways>
class PlruTree {
  static_assert(Ways >= 2 && std::has_single_bit(Ways), "PLRU needs a power-of-two way count");

 public:
  static constexpr unsigned kWays = Ways;
  static constexpr unsigned kNodes = Ways - 1;

  constexpr const std::array<std::uint8_t, kNodes>& bits() const noexcept { return bits_; }
  constexpr std::array<std::uint8_t, kNodes>& bits() noexcept { return bits_; }

  friend constexpr bool operator==(const PlruTree&, const PlruTree&) = default;

 private:
  std::array<std::uint8_t, kNodes> bits_{};
};

/// Sets every node on the root-to-`way` path to point away from `way`.
template <unsigned Ways>
constexpr PlruTree<Ways> plru_touch(PlruTree<Ways> tree, unsigned way) {
  if (way >= Ways) throw ContractViolation("plru_touch: way out of range");
  unsigned node = 0;
  unsigned lo = 0;
  unsigned span = Ways;
  while (span > 1) {
    span /= 2;
    const bool in_right = way >= lo + span;
    tree.bits()[node] = in_right ? 0 : 1;
    node = 2 * node + (in_right ? 2 : 1);
    if (in_right) lo += span;
  }
  return tree;
}

/// Follows node flags from the root to a leaf. Does not mutate.
template <unsigned Ways>
constexpr unsigned plru_victim(const PlruTree<Ways>& tree) noexcept {
  unsigned node = 0;
  while (node < PlruTree<Ways>::kNodes) node = 2 * node + (tree.bits()[node] ? 2 : 1);
  return node - PlruTree<Ways>::kNodes;
}

template <unsigned Ways>
void serialize(ByteSink& sink, const PlruTree<Ways>& tree) {
  for (std::uint8_t b : tree.bits()) sink.put_u8(b);
}

}  // namespace tpsim

#endif  // TPSIM_UARCH_PLRU_HPP
