#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parsejargon/pipeline.hpp"
#include "parsejargon/protocol.hpp"
#include "parsejargon/session.hpp"
#include "parsejargon/storage.hpp"

namespace parsejargon {

class Gateway;
class SessionLoop;

struct ServiceConfig {
  SessionConfig session;
  int64_t tick_ms = kDefaultTickMs;
  /// When false, scheduler ticks only happen through Service::tick.
  bool background_ticks = true;
};

/// Monotonic milliseconds.
using Clock = std::function<int64_t()>;
Clock steady_clock_ms();

// Session lifecycle over per-session event loops. Every operation on a
// session (client messages, ticks, attach, export) runs on that session's
// loop, in submission order; distinct sessions run concurrently. Server
// messages are committed to storage before they reach the attached sink.
class Service {
 public:
  using Sink = std::function<void(const std::string& serialized)>;
  using Messages = std::vector<nlohmann::ordered_json>;

  /// Restores every persisted session from `storage`.
  Service(std::shared_ptr<const Gateway> gateway,
          std::shared_ptr<Storage> storage, ServiceConfig config = {},
          Clock clock = steady_clock_ms());
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Personalized iff the profile has a background. Throws StorageUnavailable.
  std::string create_session(const std::optional<UserProfile>& profile,
                             std::optional<int64_t> min_display_ms = {});

  /// Throws UnknownSession, SessionEnded, MalformedMessage,
  /// StorageUnavailable.
  Messages handle_client_message(const protocol::ClientMessage& msg);

  /// Appends a sequenced diagnostic (used for transport-level errors).
  void emit_diagnostic(const std::string& session_id, const std::string& code,
                       const std::string& detail);

  /// One scheduler step at the session's current time.
  Messages tick(const std::string& session_id);

  /// Throws UnknownSession.
  nlohmann::ordered_json get_session_export(const std::string& session_id);
  Mode session_mode(const std::string& session_id);
  bool has_session(const std::string& session_id);

  /// Replays persisted messages with seq > last_seq into `sink`, then streams
  /// live ones. One sink per session; throws AlreadyAttached otherwise.
  uint64_t attach(const std::string& session_id, int64_t last_seq, Sink sink);
  void detach(const std::string& session_id, uint64_t token);

 private:
  std::shared_ptr<SessionLoop> loop_for(const std::string& session_id);
  std::shared_ptr<SessionLoop> start_loop(Session session);

  std::shared_ptr<const Gateway> gateway_;
  std::shared_ptr<Storage> storage_;
  ServiceConfig config_;
  Clock clock_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<SessionLoop>> loops_;
};

}  // namespace parsejargon
