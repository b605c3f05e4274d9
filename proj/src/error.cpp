#include "hitl/error.hpp"

namespace hitl {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::FeedbackDivergence: return "FeedbackDivergence";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::SinkUnavailable: return "SinkUnavailable";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::IOFailure: return "IOFailure";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::NotAwaiting: return "NotAwaiting";
    case ErrorCode::InvalidDecision: return "InvalidDecision";
    case ErrorCode::SessionLimit: return "SessionLimit";
    case ErrorCode::Aborted: return "Aborted";
  }
  return "Unknown";
}

}  // namespace hitl
