#ifndef TPSIM_MACHINE_WORKLOAD_HPP
#define TPSIM_MACHINE_WORKLOAD_HPP

#include <cstdint>
#include <variant>
#include <vector>

#include "tpsim/uarch/cache.hpp"

namespace tpsim {

inline constexpr DomainId kKernelDomain = 0;
inline constexpr DomainId kSpyDomain = 1;
inline constexpr DomainId kTrojanDomain = 2;

inline constexpr std::uint64_t kPageBytes = 4096;
inline constexpr std::uint64_t kRegionBytes = std::uint64_t{1} << 32;

/// Every domain owns a disjoint 4 GiB region. Regions are aligned far above
/// any cache index bits, so equal offsets collide on-core across domains.
constexpr std::uint64_t region_base(DomainId d) noexcept {
  return (std::uint64_t{d} + 1) * kRegionBytes;
}
constexpr bool in_region(DomainId d, std::uint64_t addr) noexcept {
  return addr >= region_base(d) && addr - region_base(d) < kRegionBytes;
}

struct Read {
  std::uint64_t addr;
};
struct Write {
  std::uint64_t addr;
};
struct CondBranch {
  std::uint64_t pc;
  bool taken;
};
struct IndirectJump {
  std::uint64_t pc;
  std::uint64_t target;
};
struct FetchAt {
  std::uint64_t pc;
};

using WorkloadOp = std::variant<Read, Write, CondBranch, IndirectJump, FetchAt>;
using Workload = std::vector<WorkloadOp>;

}  // namespace tpsim

#endif  // TPSIM_MACHINE_WORKLOAD_HPP
