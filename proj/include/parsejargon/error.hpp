#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace parsejargon {

enum class ErrorCode {
  // ingest
  OutOfOrderChunk,
  SessionMismatch,
  ParseError,
  NonMonotonicTimestamp,
  EmptyFile,
  // llm gateway
  MissingBinding,
  EmptyTranscript,
  EmptyGlossary,
  EmptyBackground,
  MalformedTermList,
  MalformedFilterResult,
  // pipeline
  SequenceGap,
  UnknownTerm,
  // scheduler
  DuplicateKey,
  // service
  StorageUnavailable,
  SessionEnded,
  MalformedMessage,
  UnknownSession,
  AlreadyAttached,
  // eval harness
  MissingProfile,
  LabelMismatch,
  EmptySheet,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::string_view detail() const noexcept { return detail_; }
  /// 1-based line number for file-level errors.
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

}  // namespace parsejargon
