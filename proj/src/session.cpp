#include "parsejargon/session.hpp"

#include "parsejargon/error.hpp"
#include "parsejargon/gateway.hpp"

namespace parsejargon {

using nlohmann::json;
using nlohmann::ordered_json;
using protocol::ServerType;

Session::Session(std::string session_id, UserProfile profile,
                 SessionConfig config, std::string created_at)
    : config_(config),
      created_at_(std::move(created_at)),
      buffer_(session_id, config.silence_flush_ms),
      display_(config.min_display_ms) {
  state_.session_id = std::move(session_id);
  state_.profile = std::move(profile);
}

void Session::advance_clock(int64_t now_ms) {
  last_now_ms_ = std::max(last_now_ms_, now_ms);
}

ordered_json Session::next_message(ServerType type,
                                   const ordered_json& payload) {
  return protocol::server_message(type, state_.session_id, next_server_seq_++,
                                  payload);
}

ordered_json Session::diagnostic(const std::string& code,
                                 const std::string& detail) {
  Diagnostic d{code, detail, std::nullopt};
  diagnostics_.push_back(d);
  return next_message(ServerType::Diagnostic, protocol::to_json(d));
}

void Session::emit_display(const DisplayChange& change, Messages& out) {
  const TermEntry* entry = state_.find(change.key);
  ordered_json payload;
  payload["key"] = change.key;
  payload["term"] = entry ? entry->term : change.key;
  payload["definition"] = entry ? entry->definition : "";
  payload["shown_since_ms"] = change.shown_since_ms;
  payload["queue_depth"] = change.queue_depth;
  out.push_back(next_message(ServerType::DisplayChange, payload));
}

void Session::run_segment(const TranscriptSegment& segment,
                          const Gateway& gateway, int64_t now_ms,
                          Messages& out) {
  out.push_back(next_message(ServerType::Segment, protocol::to_json(segment)));

  // Identification time follows the caption timeline so exports replay
  // byte-identically.
  auto [next, delta] =
      process_segment(state_, segment, gateway, segment.t_end_ms);
  state_ = std::move(next);

  for (auto& d : delta.diagnostics) {
    diagnostics_.push_back(d);
    out.push_back(next_message(ServerType::Diagnostic, protocol::to_json(d)));
  }
  for (const auto& entry : delta.new_entries) {
    out.push_back(next_message(ServerType::NewTerm, protocol::to_json(entry)));
  }
  for (const auto& entry : delta.new_entries) {
    auto change = display_.push(entry.key, now_ms);
    max_queue_depth_ = std::max(max_queue_depth_, display_.queue().size());
    if (change) emit_display(*change, out);
  }
  if (!delta.understood_dropped.empty()) {
    ordered_json payload;
    payload["segment_seq"] = segment.seq;
    payload["terms"] = delta.understood_dropped;
    out.push_back(next_message(ServerType::UnderstoodDropped, payload));
  }
  if (!delta.highlights.empty()) {
    ordered_json payload;
    payload["segment_seq"] = segment.seq;
    payload["spans"] = ordered_json::array();
    for (const auto& span : delta.highlights) {
      payload["spans"].push_back(protocol::to_json(span));
    }
    out.push_back(next_message(ServerType::Highlight, payload));
  }
}

Session::Messages Session::handle(const protocol::ClientMessage& msg,
                                  const Gateway& gateway, int64_t now_ms) {
  if (msg.session_id != state_.session_id) {
    throw Error(ErrorCode::MalformedMessage,
                "message for session '" + msg.session_id + "'");
  }
  if (ended_) throw Error(ErrorCode::SessionEnded, state_.session_id);
  advance_clock(now_ms);

  Messages out;
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, protocol::Attach>) {
          throw Error(ErrorCode::MalformedMessage,
                      "attach is only valid as the first stream frame");
        } else if constexpr (std::is_same_v<T, protocol::Caption>) {
          advance_clock(body.t_ms);
          std::vector<TranscriptSegment> segments;
          try {
            segments = buffer_.ingest({msg.session_id, body.text, body.t_ms});
          } catch (const Error& e) {
            out.push_back(diagnostic(std::string(to_string(e.code())),
                                     std::string(e.detail())));
            return;
          }
          for (const auto& segment : segments) {
            run_segment(segment, gateway, last_now_ms_, out);
          }
        } else if constexpr (std::is_same_v<T, protocol::Feedback>) {
          FeedbackEvent event{body.term, body.verdict,
                              body.at_ms.value_or(last_now_ms_)};
          try {
            state_ = apply_feedback(state_, event);
          } catch (const Error& e) {
            out.push_back(diagnostic(std::string(to_string(e.code())),
                                     std::string(e.detail())));
            return;
          }
          ordered_json payload;
          payload["key"] = state_.feedback_log.back().key;
          payload["verdict"] = to_string(body.verdict);
          out.push_back(next_message(ServerType::FeedbackAck, payload));
        } else if constexpr (std::is_same_v<T, protocol::SetProfile>) {
          state_.profile.background_text = body.background;
          out.push_back(diagnostic("profile_updated",
                                   std::string(to_string(state_.mode()))));
        } else {
          if (auto segment = buffer_.force_flush()) {
            run_segment(*segment, gateway, last_now_ms_, out);
          }
          ended_ = true;
          out.push_back(diagnostic("session_ended", ""));
        }
      },
      msg.body);
  return out;
}

Session::Messages Session::tick(const Gateway& gateway, int64_t now_ms) {
  Messages out;
  if (ended_) return out;
  advance_clock(now_ms);
  if (auto segment = buffer_.flush(last_now_ms_)) {
    run_segment(*segment, gateway, last_now_ms_, out);
  }
  if (auto change = display_.tick(last_now_ms_)) emit_display(*change, out);
  return out;
}

ordered_json Session::export_document() const {
  ordered_json doc;
  doc["v"] = protocol::kVersion;
  doc["session_id"] = state_.session_id;
  doc["mode"] = to_string(state_.mode());
  doc["status"] = ended_ ? "ended" : "live";
  doc["glossary"] = export_glossary(state_);
  doc["feedback_log"] = ordered_json::array();
  for (const auto& event : state_.feedback_log) {
    ordered_json e;
    e["key"] = event.key;
    e["verdict"] = to_string(event.verdict);
    e["at_ms"] = event.at_ms;
    doc["feedback_log"].push_back(std::move(e));
  }
  doc["diagnostics"] = ordered_json::array();
  for (const auto& d : diagnostics_) {
    doc["diagnostics"].push_back(protocol::to_json(d));
  }
  doc["display"]["max_queue_depth"] = max_queue_depth_;
  return doc;
}

SessionRecord Session::record() const {
  return {state_.session_id, created_at_, std::string(to_string(mode())),
          json::parse(protocol::to_json(state_.profile).dump()),
          ended_ ? "ended" : "live"};
}

json Session::snapshot() const {
  json j;
  j["session_id"] = state_.session_id;
  j["created_at"] = created_at_;
  j["config"] = {{"min_display_ms", config_.min_display_ms},
                 {"silence_flush_ms", config_.silence_flush_ms}};
  j["profile"] = json::parse(protocol::to_json(state_.profile).dump());
  j["glossary"] = json::array();
  for (const auto& e : state_.glossary) {
    j["glossary"].push_back({{"term", e.term},
                             {"key", e.key},
                             {"definition", e.definition},
                             {"origin_seq", e.origin_seq},
                             {"identified_at_ms", e.identified_at_ms}});
  }
  j["feedback_log"] = json::array();
  for (const auto& f : state_.feedback_log) {
    j["feedback_log"].push_back(
        {{"key", f.key}, {"verdict", to_string(f.verdict)}, {"at_ms", f.at_ms}});
  }
  j["next_seq_expected"] = state_.next_seq_expected;

  const auto b = buffer_.snapshot();
  j["buffer"] = {{"pending", b.pending},
                 {"pending_start_ms", b.pending_start_ms ? json(*b.pending_start_ms) : json()},
                 {"last_seen_t_ms", b.last_seen_t_ms ? json(*b.last_seen_t_ms) : json()},
                 {"last_text_t_ms", b.last_text_t_ms ? json(*b.last_text_t_ms) : json()},
                 {"next_seq", b.next_seq}};
  j["display"] = {{"current", display_.current() ? json(*display_.current()) : json()},
                  {"shown_since_ms", display_.shown_since_ms()},
                  {"queue", display_.queue()},
                  {"max_queue_depth", max_queue_depth_}};
  j["diagnostics"] = json::array();
  for (const auto& d : diagnostics_) {
    json dj{{"code", d.code}, {"detail", d.detail}};
    if (d.seq) dj["segment_seq"] = *d.seq;
    j["diagnostics"].push_back(std::move(dj));
  }
  j["next_server_seq"] = next_server_seq_;
  j["last_now_ms"] = last_now_ms_;
  j["ended"] = ended_;
  return j;
}

Session Session::restore(const json& j) {
  auto optional_int = [](const json& v) -> std::optional<int64_t> {
    if (v.is_null()) return std::nullopt;
    return v.get<int64_t>();
  };
  SessionConfig config{j.at("config").at("min_display_ms").get<int64_t>(),
                       j.at("config").at("silence_flush_ms").get<int64_t>()};
  Session session(j.at("session_id"), protocol::profile_from_json(j.at("profile")),
                  config, j.at("created_at"));
  for (const auto& e : j.at("glossary")) {
    TermEntry entry{e.at("term"), e.at("key"), e.at("definition"),
                    e.at("origin_seq"), e.at("identified_at_ms")};
    session.state_.defined_keys.insert(entry.key);
    session.state_.glossary.push_back(std::move(entry));
  }
  for (const auto& f : j.at("feedback_log")) {
    session.state_.feedback_log.push_back(
        {f.at("key"), verdict_from_string(f.at("verdict").get<std::string>()),
         f.at("at_ms")});
  }
  session.state_.next_seq_expected = j.at("next_seq_expected");

  const auto& b = j.at("buffer");
  SegmentationBuffer::Snapshot snap;
  snap.session_id = session.state_.session_id;
  snap.pending = b.at("pending");
  snap.pending_start_ms = optional_int(b.at("pending_start_ms"));
  snap.last_seen_t_ms = optional_int(b.at("last_seen_t_ms"));
  snap.last_text_t_ms = optional_int(b.at("last_text_t_ms"));
  snap.next_seq = b.at("next_seq");
  snap.silence_flush_ms = config.silence_flush_ms;
  session.buffer_ = SegmentationBuffer::restore(snap);

  const auto& d = j.at("display");
  std::optional<std::string> current;
  if (!d.at("current").is_null()) current = d.at("current").get<std::string>();
  session.display_ = DisplayState::restore(
      std::move(current), d.at("shown_since_ms"),
      d.at("queue").get<std::deque<std::string>>(), config.min_display_ms);
  session.max_queue_depth_ = d.at("max_queue_depth");

  for (const auto& dj : j.at("diagnostics")) {
    Diagnostic diag{dj.at("code"), dj.at("detail"), std::nullopt};
    if (dj.contains("segment_seq")) diag.seq = dj.at("segment_seq").get<int64_t>();
    session.diagnostics_.push_back(std::move(diag));
  }
  session.next_server_seq_ = j.at("next_server_seq");
  session.last_now_ms_ = j.at("last_now_ms");
  session.ended_ = j.at("ended");
  return session;
}

}  // namespace parsejargon
