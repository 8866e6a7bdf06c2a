#pragma once

#include <stdexcept>
#include <string>

namespace marlab {

/// A table or tensor would exceed a configured size or overflow its index type.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

/// A serialized artifact (game file, spec file, policy file, ...) is malformed.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace marlab
