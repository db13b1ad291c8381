#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parsejargon/ingest.hpp"
#include "parsejargon/pipeline.hpp"
#include "parsejargon/protocol.hpp"
#include "parsejargon/scheduler.hpp"
#include "parsejargon/storage.hpp"

namespace parsejargon {

class Gateway;

struct SessionConfig {
  int64_t min_display_ms = kDefaultMinDisplayMs;
  int64_t silence_flush_ms = kDefaultSilenceFlushMs;
};

// One meeting session: segmentation buffer, pipeline state and display slot,
// plus the gapless server-message sequence. Not thread-safe; the owning event
// loop serializes every call.
class Session {
 public:
  using Messages = std::vector<nlohmann::ordered_json>;

  Session(std::string session_id, UserProfile profile, SessionConfig config,
          std::string created_at);

  /// Runs one client message through ingest → pipeline → scheduler.
  /// Throws SessionEnded once ended, MalformedMessage for attach frames or a
  /// foreign session id. Domain errors (unknown feedback term, out-of-order
  /// chunk) come back as diagnostic messages.
  Messages handle(const protocol::ClientMessage& msg, const Gateway& gateway,
                  int64_t now_ms);

  /// Silence flush, then one scheduler step.
  Messages tick(const Gateway& gateway, int64_t now_ms);

  /// A sequenced diagnostic, also kept for the export.
  nlohmann::ordered_json diagnostic(const std::string& code,
                                    const std::string& detail);

  /// {v, session_id, mode, status, glossary, feedback_log, diagnostics,
  ///  display}
  nlohmann::ordered_json export_document() const;

  nlohmann::json snapshot() const;
  static Session restore(const nlohmann::json& snapshot);
  SessionRecord record() const;

  const std::string& id() const { return state_.session_id; }
  const SessionState& state() const { return state_; }
  const DisplayState& display() const { return display_; }
  Mode mode() const { return state_.mode(); }
  bool ended() const { return ended_; }
  int64_t last_seq() const { return next_server_seq_ - 1; }
  int64_t now_ms() const { return last_now_ms_; }

 private:
  nlohmann::ordered_json next_message(protocol::ServerType type,
                                      const nlohmann::ordered_json& payload);
  void run_segment(const TranscriptSegment& segment, const Gateway& gateway,
                   int64_t now_ms, Messages& out);
  void emit_display(const DisplayChange& change, Messages& out);
  void advance_clock(int64_t now_ms);

  SessionConfig config_;
  std::string created_at_;
  SessionState state_;
  SegmentationBuffer buffer_;
  DisplayState display_;
  std::vector<Diagnostic> diagnostics_;
  std::size_t max_queue_depth_ = 0;
  int64_t next_server_seq_ = 0;
  int64_t last_now_ms_ = 0;
  bool ended_ = false;
};

}  // namespace parsejargon
