#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "parsejargon/protocol.hpp"
#include "parsejargon/service.hpp"

namespace httplib {
class Server;
}

namespace parsejargon {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int http_port = 8080;    // 0 picks an ephemeral port
  int stream_port = 8081;  // 0 picks an ephemeral port
};

// Network front end of a Service.
//
// HTTP:
//   POST /v1/sessions              {"v":1, "profile"?: {...}, "min_display_ms"?}
//                                  → 201 {"v":1, "session_id", "mode"}
//   GET  /v1/sessions/{id}/export  → 200 export document | 404
//   GET  /health                   → 200 {"status":"ok"}
// Stream: TCP, length-delimited JSON frames (see protocol.hpp). Errors that
// precede a successful attach are answered with an unsequenced
// {"v":1, "type":"error", "code", "detail"} frame and the connection closes.
class Server {
 public:
  Server(std::shared_ptr<Service> service, ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds both listeners and serves in background threads.
  void start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  int http_port() const { return http_port_; }
  int stream_port() const { return stream_port_; }

 private:
  struct Connection;
  void accept_loop();
  void serve_connection(std::shared_ptr<Connection> connection);

  std::shared_ptr<Service> service_;
  ServerConfig config_;
  std::unique_ptr<httplib::Server> http_;
  std::thread http_thread_;
  std::thread accept_thread_;
  int listen_fd_ = -1;
  int http_port_ = 0;
  int stream_port_ = 0;
  std::atomic<bool> running_{false};
  std::mutex connections_mutex_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::vector<std::thread> connection_threads_;
};

/// Blocking client for the stream endpoint.
class StreamClient {
 public:
  StreamClient(const std::string& host, int port);
  ~StreamClient();
  StreamClient(const StreamClient&) = delete;
  StreamClient& operator=(const StreamClient&) = delete;

  void send(const protocol::ClientMessage& msg);
  void send_raw(const std::string& payload);
  /// Next frame, or nullopt on timeout or a closed connection.
  std::optional<nlohmann::json> receive(std::chrono::milliseconds timeout);
  void close();

 private:
  int fd_ = -1;
  protocol::FrameDecoder decoder_;
};

}  // namespace parsejargon
