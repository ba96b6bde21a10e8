#pragma once

#include <stdexcept>
#include <string>

namespace latentsearch {

// Mirrors ls_status in the C header; keep the numeric values in sync.
enum class ErrorCode {
  kInvalidArgument = 1,
  kShapeMismatch = 2,
  kOutOfRange = 3,
  kNotFound = 4,
  kIo = 5,
  kBadMagic = 6,
  kUnsupportedVersion = 7,
  kChecksumMismatch = 8,
  kTruncated = 9,
  kCorruptStream = 10,
  kImageDecode = 11,
  kModelMismatch = 12,
  kInternal = 13,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace latentsearch
