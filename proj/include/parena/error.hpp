#ifndef PARENA_ERROR_HPP_
#define PARENA_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace parena {

enum class ErrorCode {
  kInvalidArgument,
  kMissingAttacker,
  kNumericOverflow,
  kMissingRecord,
  kDuplicateRecord,
  kMissingTarget,
  kMalformedField,
  kEmptyInput,
  kIo,
  kConfig,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kMissingAttacker: return "missing-attacker";
    case ErrorCode::kNumericOverflow: return "numeric-overflow";
    case ErrorCode::kMissingRecord: return "missing-record";
    case ErrorCode::kDuplicateRecord: return "duplicate-record";
    case ErrorCode::kMissingTarget: return "missing-target";
    case ErrorCode::kMalformedField: return "malformed-field";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

// All library failures are reported as ArenaError; what() carries the
// code name followed by a message naming the offending field or key.
class ArenaError : public std::runtime_error {
 public:
  ArenaError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace parena

#endif  // PARENA_ERROR_HPP_
