#ifndef TPSIM_UARCH_MISS_HANDLER_HPP
#define TPSIM_UARCH_MISS_HANDLER_HPP

#include <cstdint>
#include <optional>

#include "tpsim/uarch/serialize.hpp"

namespace tpsim {

/// L1D miss handler. Holds the most recent refill request; a request that
/// survives a fence.t (`stale`) is replayed before the next data access.
class MissHandler {
 public:
  struct Request {
    std::uint64_t addr = 0;
    std::uint64_t issue_cycle = 0;
    bool is_store = false;
    friend constexpr bool operator==(const Request&, const Request&) = default;
  };

  const std::optional<Request>& in_flight() const noexcept { return in_flight_; }
  bool stale() const noexcept { return stale_; }

  void record(Request r) noexcept {
    in_flight_ = r;
    stale_ = false;
  }
  void mark_stale() noexcept { stale_ = in_flight_.has_value(); }
  std::optional<Request> take() noexcept {
    auto r = in_flight_;
    clear();
    return r;
  }
  void clear() noexcept {
    in_flight_.reset();
    stale_ = false;
  }

  friend void serialize(ByteSink& sink, const MissHandler& m) {
    sink.put_bool(m.in_flight_.has_value());
    if (m.in_flight_) {
      sink.put_u64(m.in_flight_->addr);
      sink.put_u64(m.in_flight_->issue_cycle);
      sink.put_bool(m.in_flight_->is_store);
    }
    sink.put_bool(m.stale_);
  }
  friend bool operator==(const MissHandler&, const MissHandler&) = default;

 private:
  std::optional<Request> in_flight_;
  bool stale_ = false;
};

}  // namespace tpsim

#endif  // TPSIM_UARCH_MISS_HANDLER_HPP
