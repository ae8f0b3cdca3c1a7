#include "gpnav/error.hpp"

namespace gpnav {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kValidation:
    case ErrorKind::kParse:
    case ErrorKind::kFactorization:
      return 2;
    case ErrorKind::kBlockedEndpoint:
      return 3;
    case ErrorKind::kDisconnected:
      return 4;
    case ErrorKind::kNonConvergence:
      return 5;
    case ErrorKind::kIo:
      return 6;
  }
  return 1;
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kFactorization: return "factorization";
    case ErrorKind::kBlockedEndpoint: return "blocked endpoint";
    case ErrorKind::kDisconnected: return "disconnected";
    case ErrorKind::kNonConvergence: return "non-convergence";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace gpnav
