#pragma once

#include <stdexcept>
#include <string>

namespace sinkprobe {

enum class ErrorKind {
  kInvalidArgument,    // bad configuration or caller precondition
  kData,               // malformed, inconsistent or unreadable input data
  kMissingCapability,  // input lacks an optional payload the operation needs
};

/// Single exception type for the library. The kind selects the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_invalid(const std::string& message) {
  throw Error(ErrorKind::kInvalidArgument, message);
}

[[noreturn]] inline void throw_data(const std::string& message) {
  throw Error(ErrorKind::kData, message);
}

}  // namespace sinkprobe
