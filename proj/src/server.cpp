#include "parsejargon/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include <httplib.h>

#include "parsejargon/error.hpp"

namespace parsejargon {

using nlohmann::json;

namespace {

bool write_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    bytes.remove_prefix(static_cast<size_t>(n));
  }
  return true;
}

json error_frame(ErrorCode code, const std::string& detail) {
  return {{"v", protocol::kVersion},
          {"type", "error"},
          {"code", std::string(to_string(code))},
          {"detail", detail}};
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::StorageUnavailable: return 503;
    default: return 400;
  }
}

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

}  // namespace

struct Server::Connection {
  explicit Connection(int fd) : fd(fd) {}
  ~Connection() { ::close(fd); }

  bool write_frame(const std::string& payload) {
    std::lock_guard lock(write_mutex);
    if (closed) return false;
    if (!write_all(fd, protocol::encode_frame(payload))) closed = true;
    return !closed;
  }
  void shutdown() {
    std::lock_guard lock(write_mutex);
    ::shutdown(fd, SHUT_RDWR);
    closed = true;
  }

  int fd;
  std::mutex write_mutex;
  bool closed = false;
};

Server::Server(std::shared_ptr<Service> service, ServerConfig config)
    : service_(std::move(service)), config_(std::move(config)) {}

Server::~Server() { stop(); }

void Server::start() {
  http_ = std::make_unique<httplib::Server>();

  http_->Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, R"({"status":"ok"})");
  });

  http_->Post("/v1/sessions", [this](const httplib::Request& req,
                                     httplib::Response& res) {
    try {
      std::optional<UserProfile> profile;
      std::optional<int64_t> min_display_ms;
      if (!req.body.empty()) {
        auto body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
          throw Error(ErrorCode::MalformedMessage, "body must be a JSON object");
        }
        if (body.value("v", protocol::kVersion) != protocol::kVersion) {
          throw Error(ErrorCode::MalformedMessage, "unsupported version");
        }
        if (body.contains("profile") && !body["profile"].is_null()) {
          profile = protocol::profile_from_json(body["profile"]);
        }
        if (body.contains("min_display_ms")) {
          if (!body["min_display_ms"].is_number_integer() ||
              body["min_display_ms"].get<int64_t>() <= 0) {
            throw Error(ErrorCode::MalformedMessage,
                        "min_display_ms must be a positive integer");
          }
          min_display_ms = body["min_display_ms"].get<int64_t>();
        }
      }
      const std::string id = service_->create_session(profile, min_display_ms);
      json out{{"v", protocol::kVersion},
               {"session_id", id},
               {"mode", to_string(service_->session_mode(id))}};
      send_json(res, 201, out.dump());
    } catch (const Error& e) {
      send_json(res, http_status_for(e.code()),
                error_frame(e.code(), std::string(e.detail())).dump());
    }
  });

  http_->Get(R"(/v1/sessions/([^/]+)/export)",
             [this](const httplib::Request& req, httplib::Response& res) {
               try {
                 send_json(res, 200,
                           service_->get_session_export(req.matches[1]).dump());
               } catch (const Error& e) {
                 send_json(res, http_status_for(e.code()),
                           error_frame(e.code(), std::string(e.detail())).dump());
               }
             });

  if (config_.http_port == 0) {
    http_port_ = http_->bind_to_any_port(config_.host);
  } else if (http_->bind_to_port(config_.host, config_.http_port)) {
    http_port_ = config_.http_port;
  } else {
    http_port_ = -1;
  }
  if (http_port_ < 0) {
    throw Error(ErrorCode::InvalidArgument, "cannot bind HTTP port");
  }

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::InvalidArgument, "socket()");
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(config_.stream_port));
  if (::inet_pton(AF_INET, config_.host.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::InvalidArgument, "bad host " + config_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listen_fd_, 16) < 0) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("cannot bind stream port: ") + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  stream_port_ = ntohs(addr.sin_port);

  running_ = true;
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  accept_thread_ = std::thread([this] { accept_loop(); });
  http_->wait_until_ready();
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  http_->stop();
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (http_thread_.joinable()) http_thread_.join();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(connections_mutex_);
    for (auto& c : connections_) c->shutdown();
    threads.swap(connection_threads_);
  }
  for (auto& t : threads) t.join();
  std::lock_guard lock(connections_mutex_);
  connections_.clear();
}

void Server::wait() {
  while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void Server::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof(yes));
    auto connection = std::make_shared<Connection>(fd);
    std::lock_guard lock(connections_mutex_);
    if (!running_) return;
    connections_.push_back(connection);
    connection_threads_.emplace_back(
        [this, connection] { serve_connection(connection); });
  }
}

void Server::serve_connection(std::shared_ptr<Connection> connection) {
  protocol::FrameDecoder decoder;
  std::optional<std::string> session_id;
  uint64_t token = 0;
  char buf[4096];

  auto handle_payload = [&](const std::string& payload) -> bool {
    if (!session_id) {
      try {
        auto msg = protocol::parse_client_frame(payload);
        const auto* attach = std::get_if<protocol::Attach>(&msg.body);
        if (!attach) {
          throw Error(ErrorCode::MalformedMessage,
                      "first frame must be attach");
        }
        token = service_->attach(
            msg.session_id, attach->last_seq,
            [connection](const std::string& s) { connection->write_frame(s); });
        session_id = msg.session_id;
        return true;
      } catch (const Error& e) {
        connection->write_frame(
            error_frame(e.code(), std::string(e.detail())).dump());
        return false;
      }
    }
    try {
      auto msg = protocol::parse_client_frame(payload);
      if (msg.session_id != *session_id) {
        throw Error(ErrorCode::MalformedMessage,
                    "stream is attached to " + *session_id);
      }
      service_->handle_client_message(msg);
    } catch (const Error& e) {
      try {
        service_->emit_diagnostic(*session_id, std::string(to_string(e.code())),
                                  std::string(e.detail()));
      } catch (const Error& inner) {
        connection->write_frame(
            error_frame(inner.code(), std::string(inner.detail())).dump());
      }
    }
    return true;
  };

  bool open = true;
  while (open) {
    const ssize_t n = ::recv(connection->fd, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    decoder.feed(std::string_view(buf, static_cast<size_t>(n)));
    try {
      while (auto payload = decoder.next()) {
        if (!handle_payload(*payload)) {
          open = false;
          break;
        }
      }
    } catch (const Error& e) {  // oversized frame: the stream is unusable
      connection->write_frame(
          error_frame(e.code(), std::string(e.detail())).dump());
      open = false;
    }
  }
  if (session_id) {
    try {
      service_->detach(*session_id, token);
    } catch (const Error&) {
    }
  }
  connection->shutdown();
}

// --- StreamClient ----------------------------------------------------------

StreamClient::StreamClient(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints,
                    &result) != 0) {
    throw Error(ErrorCode::InvalidArgument, "cannot resolve " + host);
  }
  fd_ = ::socket(result->ai_family, result->ai_socktype, result->ai_protocol);
  const int rc = fd_ < 0 ? -1 : ::connect(fd_, result->ai_addr, result->ai_addrlen);
  ::freeaddrinfo(result);
  if (rc < 0) {
    if (fd_ >= 0) ::close(fd_);
    throw Error(ErrorCode::InvalidArgument,
                "cannot connect to " + host + ":" + std::to_string(port));
  }
  int yes = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof(yes));
}

StreamClient::~StreamClient() { close(); }

void StreamClient::send(const protocol::ClientMessage& msg) {
  send_raw(protocol::to_json(msg).dump());
}

void StreamClient::send_raw(const std::string& payload) {
  if (!write_all(fd_, protocol::encode_frame(payload))) {
    throw Error(ErrorCode::InvalidArgument, "stream closed");
  }
}

std::optional<json> StreamClient::receive(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto payload = decoder_.next()) return json::parse(*payload);
    if (fd_ < 0) return std::nullopt;
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) return std::nullopt;
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (rc <= 0) {
      if (rc < 0 && errno == EINTR) continue;
      return std::nullopt;
    }
    char buf[4096];
    const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n <= 0) {
      close();
      continue;  // drain whatever is already decoded
    }
    decoder_.feed(std::string_view(buf, static_cast<size_t>(n)));
  }
}

void StreamClient::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace parsejargon
