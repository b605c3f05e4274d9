#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hitl {

// Integer values are mirrored by hitl_status in hitl.h; keep them in sync.
enum class ErrorCode : int {
  InvalidArgument = 1,
  InvalidState = 2,
  OutOfBounds = 3,
  IndexOutOfRange = 4,
  FeedbackDivergence = 5,
  SessionClosed = 6,
  SinkUnavailable = 7,
  EmptyInput = 8,
  BadWindow = 9,
  IOFailure = 10,
  MalformedDocument = 11,
  VersionMismatch = 12,
  InvalidConfig = 13,
  IllegalTransition = 14,
  UnknownSession = 15,
  NotAwaiting = 16,
  InvalidDecision = 17,
  SessionLimit = 18,
  Aborted = 19,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace hitl
