#pragma once

#include <stdexcept>
#include <string>

namespace spirit {

/// Process exit categories shared by the library and the CLI.
enum class ErrorKind {
  Input = 2,    // bad files, bad configs, violated preconditions
  Numeric = 1,  // overflow, divergence, non-convergence
};

/// Base class for every error raised by the toolkit. `code()` is a stable
/// machine-readable identifier ("parse_error", "training_diverged", ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
  std::string code_;
};

class InputError : public Error {
 public:
  InputError(std::string code, const std::string& message)
      : Error(ErrorKind::Input, std::move(code), message) {}
};

class NumericError : public Error {
 public:
  NumericError(std::string code, const std::string& message)
      : Error(ErrorKind::Numeric, std::move(code), message) {}
};

}  // namespace spirit
