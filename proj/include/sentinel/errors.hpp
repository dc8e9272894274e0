#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sentinel {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition of the model was violated (wrong phase, inadmissible event,
// computer index out of range).
class ModelError : public Error {
 public:
  using Error::Error;
};

// The defender received an observation that no candidate state can produce.
class InconsistentObservation : public Error {
 public:
  using Error::Error;
};

// A construction would exceed the configured state budget.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Configuration rejected; carries one message per offending field.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// An adversary emitted an event that is not admissible at the current state.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace sentinel
