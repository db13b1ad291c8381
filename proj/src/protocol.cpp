#include "parsejargon/protocol.hpp"

#include "parsejargon/error.hpp"

namespace parsejargon::protocol {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void malformed(const std::string& detail) {
  throw Error(ErrorCode::MalformedMessage, detail);
}

template <typename T>
T required(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) malformed(std::string("missing field ") + field);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    malformed(std::string("wrong type for field ") + field);
  }
}

}  // namespace

ClientMessage parse_client_message(const json& j) {
  if (!j.is_object()) malformed("message must be a JSON object");
  if (required<int>(j, "v") != kVersion) malformed("unsupported version");
  const auto type = required<std::string>(j, "type");

  ClientMessage msg;
  msg.session_id = required<std::string>(j, "session_id");
  if (type == "attach") {
    msg.body = Attach{j.contains("last_seq") ? required<int64_t>(j, "last_seq")
                                             : int64_t{-1}};
  } else if (type == "caption_chunk") {
    Caption caption{required<std::string>(j, "text"),
                    required<int64_t>(j, "t_ms")};
    if (caption.t_ms < 0) malformed("t_ms must be non-negative");
    msg.body = std::move(caption);
  } else if (type == "feedback") {
    Feedback feedback;
    feedback.term = required<std::string>(j, "term");
    const auto verdict = required<std::string>(j, "verdict");
    if (verdict != "like" && verdict != "dislike") malformed("bad verdict");
    feedback.verdict = verdict_from_string(verdict);
    if (j.contains("at_ms")) feedback.at_ms = required<int64_t>(j, "at_ms");
    msg.body = std::move(feedback);
  } else if (type == "set_profile") {
    msg.body = SetProfile{required<std::string>(j, "background")};
  } else if (type == "end_session") {
    msg.body = EndSession{};
  } else {
    malformed("unknown message type '" + type + "'");
  }
  return msg;
}

ClientMessage parse_client_frame(std::string_view payload) {
  auto j = json::parse(payload, nullptr, false);
  if (j.is_discarded()) malformed("invalid JSON");
  return parse_client_message(j);
}

json to_json(const ClientMessage& msg) {
  json j{{"v", kVersion}, {"session_id", msg.session_id}};
  std::visit(
      [&j](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, Attach>) {
          j["type"] = "attach";
          j["last_seq"] = body.last_seq;
        } else if constexpr (std::is_same_v<T, Caption>) {
          j["type"] = "caption_chunk";
          j["text"] = body.text;
          j["t_ms"] = body.t_ms;
        } else if constexpr (std::is_same_v<T, Feedback>) {
          j["type"] = "feedback";
          j["term"] = body.term;
          j["verdict"] = to_string(body.verdict);
          if (body.at_ms) j["at_ms"] = *body.at_ms;
        } else if constexpr (std::is_same_v<T, SetProfile>) {
          j["type"] = "set_profile";
          j["background"] = body.background;
        } else {
          j["type"] = "end_session";
        }
      },
      msg.body);
  return j;
}

std::string_view to_string(ServerType type) {
  switch (type) {
    case ServerType::Segment: return "segment";
    case ServerType::NewTerm: return "new_term";
    case ServerType::DisplayChange: return "display_change";
    case ServerType::UnderstoodDropped: return "understood_dropped";
    case ServerType::Highlight: return "highlight";
    case ServerType::FeedbackAck: return "feedback_ack";
    case ServerType::Diagnostic: return "diagnostic";
  }
  return "unknown";
}

ordered_json server_message(ServerType type, const std::string& session_id,
                            int64_t seq, const ordered_json& payload) {
  ordered_json j;
  j["v"] = kVersion;
  j["type"] = to_string(type);
  j["session_id"] = session_id;
  j["seq"] = seq;
  for (const auto& [key, value] : payload.items()) {
    if (!j.contains(key)) j[key] = value;  // the envelope wins
  }
  return j;
}

ordered_json to_json(const TranscriptSegment& segment) {
  ordered_json j;
  j["segment_seq"] = segment.seq;
  j["text"] = segment.text;
  j["t_start_ms"] = segment.t_start_ms;
  j["t_end_ms"] = segment.t_end_ms;
  return j;
}

ordered_json to_json(const TermEntry& entry) {
  ordered_json j;
  j["term"] = entry.term;
  j["key"] = entry.key;
  j["definition"] = entry.definition;
  j["origin_seq"] = entry.origin_seq;
  j["identified_at_ms"] = entry.identified_at_ms;
  return j;
}

ordered_json to_json(const HighlightSpan& span) {
  ordered_json j;
  j["start"] = span.start;
  j["end"] = span.end;
  j["key"] = span.key;
  return j;
}

ordered_json to_json(const Diagnostic& diagnostic) {
  ordered_json j;
  j["code"] = diagnostic.code;
  j["detail"] = diagnostic.detail;
  if (diagnostic.seq) j["segment_seq"] = *diagnostic.seq;
  return j;
}

ordered_json to_json(const UserProfile& profile) {
  ordered_json j;
  j["background"] = profile.background_text;
  j["liked"] = profile.liked_terms;
  j["disliked"] = profile.disliked_terms;
  return j;
}

UserProfile profile_from_json(const json& j) {
  if (!j.is_object()) malformed("profile must be an object");
  UserProfile profile;
  if (j.contains("background")) {
    profile.background_text = required<std::string>(j, "background");
  }
  if (j.contains("liked")) {
    for (const auto& k : required<std::vector<std::string>>(j, "liked")) {
      profile.set_verdict(normalize_term(k), Verdict::Like);
    }
  }
  if (j.contains("disliked")) {
    for (const auto& k : required<std::vector<std::string>>(j, "disliked")) {
      profile.set_verdict(normalize_term(k), Verdict::Dislike);
    }
  }
  return profile;
}

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) malformed("frame too large");
  const auto n = static_cast<uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out += static_cast<char>((n >> 24) & 0xff);
  out += static_cast<char>((n >> 16) & 0xff);
  out += static_cast<char>((n >> 8) & 0xff);
  out += static_cast<char>(n & 0xff);
  out += payload;
  return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_ += bytes; }

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const auto* p = reinterpret_cast<const unsigned char*>(buffer_.data());
  const uint32_t n = (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) |
                     (uint32_t{p[2]} << 8) | uint32_t{p[3]};
  if (n > kMaxFrameBytes) malformed("frame too large");
  if (buffer_.size() < 4 + std::size_t{n}) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + std::size_t{n});
  return payload;
}

}  // namespace parsejargon::protocol
