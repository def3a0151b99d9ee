#pragma once

#include <stdexcept>
#include <string>

namespace edgetrack {

// Single exception type for all recoverable failures in the engine. Callers
// that need to distinguish causes match on what().
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace edgetrack
