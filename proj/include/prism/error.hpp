#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prism {

enum class ErrorCode {
  kIo,
  kBadMagic,
  kTruncated,
  kShapeOverflow,
  kShapeMismatch,
  kEmptyInput,
  kNonFinite,
  kZeroNorm,
  kNotOrthogonal,
  kDecompositionFailed,
  kOutOfRange,
  kInvalidArgument,
  kManifest,
  kCeilingExceeded,
  kDegenerate,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kShapeOverflow: return "shape-overflow";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kZeroNorm: return "zero-norm";
    case ErrorCode::kNotOrthogonal: return "not-orthogonal";
    case ErrorCode::kDecompositionFailed: return "decomposition-failed";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kManifest: return "manifest";
    case ErrorCode::kCeilingExceeded: return "ceiling-exceeded";
    case ErrorCode::kDegenerate: return "degenerate";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace detail
}  // namespace prism
