#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "parsejargon/ingest.hpp"
#include "parsejargon/pipeline.hpp"

namespace parsejargon::protocol {

// Streaming protocol, version 1.
//
// Frames are a 4-byte big-endian payload length followed by one UTF-8 JSON
// object. Every object carries "v": 1 and a "type".
//
// Client → server:
//   attach         {session_id, last_seq}   must be the first frame; the
//                                           server replays messages with
//                                           seq > last_seq, then goes live
//   caption_chunk  {session_id, text, t_ms}
//   feedback       {session_id, term, verdict: "like"|"dislike", at_ms?}
//   set_profile    {session_id, background}
//   end_session    {session_id}
//
// Server → client, each with session_id and a gapless per-session "seq":
//   segment, new_term, display_change, understood_dropped, highlight,
//   feedback_ack, diagnostic

inline constexpr int kVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = 1 << 20;

struct Attach {
  int64_t last_seq = -1;
};
struct Caption {
  std::string text;
  int64_t t_ms = 0;
};
struct Feedback {
  std::string term;
  Verdict verdict = Verdict::Like;
  std::optional<int64_t> at_ms;
};
struct SetProfile {
  std::string background;
};
struct EndSession {};

struct ClientMessage {
  std::string session_id;
  std::variant<Attach, Caption, Feedback, SetProfile, EndSession> body;
};

/// Throws MalformedMessage.
ClientMessage parse_client_message(const nlohmann::json& j);
ClientMessage parse_client_frame(std::string_view payload);
nlohmann::json to_json(const ClientMessage& msg);

enum class ServerType {
  Segment,
  NewTerm,
  DisplayChange,
  UnderstoodDropped,
  Highlight,
  FeedbackAck,
  Diagnostic,
};

std::string_view to_string(ServerType type);

/// {"v":1, "type", "session_id", "seq", ...payload}
nlohmann::ordered_json server_message(ServerType type,
                                      const std::string& session_id,
                                      int64_t seq,
                                      const nlohmann::ordered_json& payload);

nlohmann::ordered_json to_json(const TranscriptSegment& segment);
nlohmann::ordered_json to_json(const TermEntry& entry);
nlohmann::ordered_json to_json(const HighlightSpan& span);
nlohmann::ordered_json to_json(const Diagnostic& diagnostic);
nlohmann::ordered_json to_json(const UserProfile& profile);
UserProfile profile_from_json(const nlohmann::json& j);

std::string encode_frame(std::string_view payload);

/// Incremental frame decoder for a byte stream.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  /// Next complete payload, if any. Throws MalformedMessage on oversized
  /// frames.
  std::optional<std::string> next();

 private:
  std::string buffer_;
};

}  // namespace parsejargon::protocol
