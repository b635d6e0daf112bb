#pragma once

#include <stdexcept>
#include <string>

namespace lsdnn {

// Error categories double as CLI exit codes and C API status codes.
enum class ErrorKind : int {
  Usage = 1,      // bad arguments, unknown config keys, ordering violations
  Data = 2,       // dimension mismatches, file format problems, missing files
  Numerical = 3,  // degenerate inputs (zero variance, non-finite values)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::Usage, w) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct DegenerateError : Error {
  explicit DegenerateError(const std::string& w)
      : Error(ErrorKind::Numerical, w) {}
};

// Warnings go to stderr unless silenced (tests silence the aliasing warning).
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);
bool warnings_enabled();

}  // namespace lsdnn
