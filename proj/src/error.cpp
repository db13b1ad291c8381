#include "parsejargon/error.hpp"

namespace parsejargon {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfOrderChunk: return "OutOfOrderChunk";
    case ErrorCode::SessionMismatch: return "SessionMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::MissingBinding: return "MissingBinding";
    case ErrorCode::EmptyTranscript: return "EmptyTranscript";
    case ErrorCode::EmptyGlossary: return "EmptyGlossary";
    case ErrorCode::EmptyBackground: return "EmptyBackground";
    case ErrorCode::MalformedTermList: return "MalformedTermList";
    case ErrorCode::MalformedFilterResult: return "MalformedFilterResult";
    case ErrorCode::SequenceGap: return "SequenceGap";
    case ErrorCode::UnknownTerm: return "UnknownTerm";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::StorageUnavailable: return "StorageUnavailable";
    case ErrorCode::SessionEnded: return "SessionEnded";
    case ErrorCode::MalformedMessage: return "MalformedMessage";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::AlreadyAttached: return "AlreadyAttached";
    case ErrorCode::MissingProfile: return "MissingProfile";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::EmptySheet: return "EmptySheet";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {
std::string format_what(ErrorCode code, const std::string& detail,
                        std::optional<std::size_t> line) {
  std::string out(to_string(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  if (!detail.empty()) out += ": " + detail;
  return out;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& detail,
             std::optional<std::size_t> line)
    : std::runtime_error(format_what(code, detail, line)),
      code_(code),
      detail_(detail),
      line_(line) {}

}  // namespace parsejargon
