#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sfgmkl {

// Failure category, also used as the process exit code by the CLI.
enum class ErrorKind : int {
  validation = 2,  // bad arguments, config, or preconditions
  data = 3,        // dataset schema, parsing, checksum
  numerical = 4,   // non-finite values, quadrature failure, invariant faults
  io = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

std::string_view to_string(ErrorKind kind) noexcept;

}  // namespace sfgmkl
