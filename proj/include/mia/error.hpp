#pragma once

#include <stdexcept>
#include <string>

namespace mia {

// All validation and IO failures in the library throw this. Messages name
// the offending file, line, document id or stage so the CLI can surface
// them unchanged.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace mia
