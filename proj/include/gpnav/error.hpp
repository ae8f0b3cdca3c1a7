#pragma once

#include <stdexcept>
#include <string>

namespace gpnav {

/// Failure categories. The CLI maps each one to a fixed process exit code.
enum class ErrorKind {
  kValidation,
  kParse,
  kFactorization,
  kBlockedEndpoint,
  kDisconnected,
  kNonConvergence,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& what) {
  return Error(ErrorKind::kValidation, what);
}
inline Error parse_error(const std::string& what) {
  return Error(ErrorKind::kParse, what);
}
inline Error io_error(const std::string& what) {
  return Error(ErrorKind::kIo, what);
}

/// 0 ok, 2 validation, 3 blocked endpoint, 4 disconnected,
/// 5 non-convergence, 6 I/O.
int exit_code(ErrorKind kind) noexcept;

const char* to_string(ErrorKind kind) noexcept;

}  // namespace gpnav
