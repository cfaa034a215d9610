#pragma once

#include <stdexcept>
#include <string>

namespace gftlab {

// invalid instance/config data (bad atoms, bad edges, non-closed family, ...)
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// enumeration blew past the configured limit
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

// operation requires an enumerable (all-discrete) instance or an exact mode
// that this instance does not support
struct CapabilityError : std::runtime_error {
  explicit CapabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// caller broke an API precondition (mismatched rule/side, sentinel misuse, ...)
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace gftlab
