#pragma once

#include <stdexcept>
#include <string>

namespace dbd {

/// Invalid user-facing configuration (bad spec fields, impossible requests).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated internal precondition between modules (shape mismatch, bad call).
class ContractError : public std::runtime_error {
public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed on-disk data. Carries the byte offset where parsing failed
/// when it is known, -1 otherwise.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& msg, long long offset = -1)
      : std::runtime_error(offset >= 0 ? msg + " (at byte offset " + std::to_string(offset) + ")"
                                       : msg),
        offset_(offset) {}
  long long offset() const { return offset_; }

private:
  long long offset_;
};

/// Filesystem failure, always tagged with the path involved.
class IoError : public std::runtime_error {
public:
  IoError(const std::string& msg, const std::string& path)
      : std::runtime_error(msg + ": " + path) {}
};

}  // namespace dbd
