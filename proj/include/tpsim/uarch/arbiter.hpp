#ifndef TPSIM_UARCH_ARBITER_HPP
#define TPSIM_UARCH_ARBITER_HPP

#include <cstdint>

#include "tpsim/errors.hpp"
#include "tpsim/uarch/serialize.hpp"

namespace tpsim {

/// Round-robin arbiter. A grant to `unit` waits for the pointer to rotate
/// to it: delay = (unit - ptr) mod n. The pointer then moves past `unit`.
class RoundRobinArbiter {
 public:
  RoundRobinArbiter() = default;
  explicit RoundRobinArbiter(unsigned n_requestors) : n_(n_requestors) {
    if (n_ == 0) throw ContractViolation("arbiter needs at least one requestor");
  }

  unsigned grant(unsigned unit) {
    if (unit >= n_) throw ContractViolation("arbiter_grant: unit out of range");
    const unsigned delay = (unit + n_ - ptr_) % n_;
    ptr_ = (unit + 1) % n_;
    return delay;
  }

  unsigned ptr() const noexcept { return ptr_; }
  unsigned n_requestors() const noexcept { return n_; }
  void set_ptr(unsigned p) {
    if (p >= n_) throw ContractViolation("arbiter pointer out of range");
    ptr_ = p;
  }
  void reset() noexcept { ptr_ = 0; }

  friend void serialize(ByteSink& sink, const RoundRobinArbiter& a) {
    sink.put_u32(a.n_);
    sink.put_u32(a.ptr_);
  }
  friend bool operator==(const RoundRobinArbiter&, const RoundRobinArbiter&) = default;

 private:
  unsigned n_ = 1;
  unsigned ptr_ = 0;
};

inline unsigned arbiter_grant(RoundRobinArbiter& arb, unsigned unit) { return arb.grant(unit); }

}  // namespace tpsim

#endif  // TPSIM_UARCH_ARBITER_HPP
