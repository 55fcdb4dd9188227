#ifndef TPSIM_ERRORS_HPP
#define TPSIM_ERRORS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace tpsim {

/// Raised when a caller breaks a documented precondition (bad way index,
/// address outside the issuing domain's region, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// fence.t completed later than the configured pad allows. Carries the
/// overshoot in cycles and, when raised inside an experiment, the iteration.
class PadExceeded : public std::runtime_error {
 public:
  explicit PadExceeded(std::uint64_t overshoot,
                       std::optional<std::size_t> iteration = std::nullopt)
      : std::runtime_error(make_message(overshoot, iteration)),
        overshoot_(overshoot),
        iteration_(iteration) {}

  std::uint64_t overshoot() const noexcept { return overshoot_; }
  std::optional<std::size_t> iteration() const noexcept { return iteration_; }

  PadExceeded at_iteration(std::size_t iteration) const {
    return PadExceeded(overshoot_, iteration);
  }

 private:
  static std::string make_message(std::uint64_t overshoot,
                                  std::optional<std::size_t> iteration) {
    std::string msg = "pad exceeded by " + std::to_string(overshoot) + " cycles";
    if (iteration) msg += " at iteration " + std::to_string(*iteration);
    return msg;
  }

  std::uint64_t overshoot_;
  std::optional<std::size_t> iteration_;
};

class InvalidMask : public std::invalid_argument {
 public:
  explicit InvalidMask(std::uint32_t mask)
      : std::invalid_argument("fence.t select mask has reserved bits set: " +
                              std::to_string(mask)),
        mask_(mask) {}
  std::uint32_t mask() const noexcept { return mask_; }

 private:
  std::uint32_t mask_;
};

class EmptySamples : public std::invalid_argument {
 public:
  EmptySamples() : std::invalid_argument("sample set is empty") {}
};

class InvalidTrials : public std::invalid_argument {
 public:
  InvalidTrials() : std::invalid_argument("number of shuffle trials must be >= 1") {}
};

class InvalidBinWidth : public std::invalid_argument {
 public:
  InvalidBinWidth() : std::invalid_argument("bin width must be >= 1") {}
};

class EmptyMatrix : public std::invalid_argument {
 public:
  EmptyMatrix() : std::invalid_argument("channel matrix is empty") {}
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ConfigError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public ConfigError {
 public:
  SchemaError(std::string key, const std::string& what)
      : ConfigError("key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public std::runtime_error {
 public:
  IoError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace tpsim

#endif  // TPSIM_ERRORS_HPP
