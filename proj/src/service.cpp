#include "parsejargon/service.hpp"

#include <chrono>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <future>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "parsejargon/error.hpp"
#include "parsejargon/gateway.hpp"

namespace parsejargon {

using nlohmann::json;
using nlohmann::ordered_json;

Clock steady_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };
}

namespace {

std::string utc_now_iso() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string random_session_id() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  std::ostringstream out;
  out << "ses_" << std::hex << std::setw(16) << std::setfill('0') << rng();
  return out.str();
}

}  // namespace

// A single-threaded executor owning one Session.
class SessionLoop {
 public:
  SessionLoop(Session session, std::shared_ptr<const Gateway> gateway,
              std::shared_ptr<Storage> storage, Clock clock, int64_t tick_ms,
              bool background_ticks)
      : session_(std::move(session)),
        gateway_(std::move(gateway)),
        storage_(std::move(storage)),
        clock_(std::move(clock)),
        clock_start_(clock_()),
        time_base_(session_.now_ms()),
        tick_ms_(tick_ms),
        background_ticks_(background_ticks),
        worker_([this] { run(); }) {}

  ~SessionLoop() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }

  /// Runs `fn(session)` on the loop thread and returns its result.
  template <typename Fn>
  auto call(Fn fn) -> decltype(fn(std::declval<Session&>())) {
    using R = decltype(fn(std::declval<Session&>()));
    auto task = std::make_shared<std::packaged_task<R()>>(
        [this, fn = std::move(fn)]() mutable { return fn(session_); });
    auto result = task->get_future();
    {
      std::lock_guard lock(mutex_);
      tasks_.emplace_back([task] { (*task)(); });
    }
    cv_.notify_all();
    return result.get();
  }

  int64_t now() const {
    return std::max(session_.now_ms(), time_base_ + (clock_() - clock_start_));
  }

  /// Applies `mutate` transactionally: commits the produced messages with the
  /// new snapshot, then forwards them to the sink. On storage failure the
  /// session is rolled back.
  /// Quiet ticks (no messages) skip the commit.
  Service::Messages apply(
      const std::function<Service::Messages(Session&)>& mutate,
      bool commit_quiet = true) {
    Session before = session_;
    const int64_t first_seq = session_.last_seq() + 1;
    Service::Messages messages;
    try {
      messages = mutate(session_);
    } catch (...) {
      session_ = std::move(before);
      throw;
    }
    if (messages.empty() && !commit_quiet) return messages;
    std::vector<std::string> serialized;
    serialized.reserve(messages.size());
    for (const auto& m : messages) serialized.push_back(m.dump());
    try {
      storage_->commit(session_.record(), session_.snapshot(), serialized,
                       first_seq);
    } catch (...) {
      session_ = std::move(before);
      throw;
    }
    if (sink_) {
      for (const auto& s : serialized) sink_(s);
    }
    return messages;
  }

  uint64_t attach(int64_t last_seq, Service::Sink sink) {
    if (sink_) {
      throw Error(ErrorCode::AlreadyAttached, session_.id());
    }
    for (const auto& s : storage_->messages_after(session_.id(), last_seq)) {
      sink(s);
    }
    sink_ = std::move(sink);
    return ++sink_token_;
  }

  void detach(uint64_t token) {
    if (token == sink_token_) sink_ = nullptr;
  }

  const Gateway& gateway() const { return *gateway_; }

 private:
  void run() {
    auto next_tick = std::chrono::steady_clock::now() +
                     std::chrono::milliseconds(tick_ms_);
    std::unique_lock lock(mutex_);
    while (true) {
      if (background_ticks_) {
        cv_.wait_until(lock, next_tick,
                       [this] { return stopping_ || !tasks_.empty(); });
      } else {
        cv_.wait(lock, [this] { return stopping_ || !tasks_.empty(); });
      }
      if (stopping_) return;
      while (!tasks_.empty()) {
        auto task = std::move(tasks_.front());
        tasks_.pop_front();
        lock.unlock();
        task();
        lock.lock();
      }
      if (background_ticks_ &&
          std::chrono::steady_clock::now() >= next_tick) {
        next_tick += std::chrono::milliseconds(tick_ms_);
        lock.unlock();
        try {
          apply([this](Session& s) { return s.tick(*gateway_, now()); },
                false);
        } catch (const std::exception&) {
          // Storage failures leave the session unchanged; the next tick
          // retries.
        }
        lock.lock();
      }
    }
  }

  Session session_;
  std::shared_ptr<const Gateway> gateway_;
  std::shared_ptr<Storage> storage_;
  Clock clock_;
  int64_t clock_start_;
  int64_t time_base_;
  int64_t tick_ms_;
  bool background_ticks_;
  Service::Sink sink_;
  uint64_t sink_token_ = 0;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stopping_ = false;
  std::thread worker_;  // last: starts after every other member is ready
};

Service::Service(std::shared_ptr<const Gateway> gateway,
                 std::shared_ptr<Storage> storage, ServiceConfig config,
                 Clock clock)
    : gateway_(std::move(gateway)),
      storage_(std::move(storage)),
      config_(config),
      clock_(std::move(clock)) {
  for (const auto& id : storage_->session_ids()) {
    auto snapshot = storage_->load_snapshot(id);
    if (!snapshot) continue;
    start_loop(Session::restore(*snapshot));
  }
}

Service::~Service() = default;

std::shared_ptr<SessionLoop> Service::start_loop(Session session) {
  std::string id = session.id();
  const bool ticks = config_.background_ticks && !session.ended();
  auto loop = std::make_shared<SessionLoop>(std::move(session), gateway_,
                                            storage_, clock_, config_.tick_ms,
                                            ticks);
  std::lock_guard lock(mutex_);
  loops_[id] = loop;
  return loop;
}

std::shared_ptr<SessionLoop> Service::loop_for(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  auto it = loops_.find(session_id);
  if (it == loops_.end()) {
    throw Error(ErrorCode::UnknownSession, session_id);
  }
  return it->second;
}

std::string Service::create_session(const std::optional<UserProfile>& profile,
                                    std::optional<int64_t> min_display_ms) {
  SessionConfig session_config = config_.session;
  if (min_display_ms) session_config.min_display_ms = *min_display_ms;
  std::string id;
  do {
    id = random_session_id();
  } while (storage_->exists(id));
  Session session(id, profile.value_or(UserProfile{}), session_config,
                  utc_now_iso());
  storage_->create(session.record(), session.snapshot());
  start_loop(std::move(session));
  return id;
}

Service::Messages Service::handle_client_message(
    const protocol::ClientMessage& msg) {
  auto loop = loop_for(msg.session_id);
  return loop->call([&loop, &msg](Session&) {
    return loop->apply([&](Session& s) {
      return s.handle(msg, loop->gateway(), loop->now());
    });
  });
}

void Service::emit_diagnostic(const std::string& session_id,
                              const std::string& code,
                              const std::string& detail) {
  auto loop = loop_for(session_id);
  loop->call([&](Session&) {
    return loop->apply([&](Session& s) {
      return Messages{s.diagnostic(code, detail)};
    });
  });
}

Service::Messages Service::tick(const std::string& session_id) {
  auto loop = loop_for(session_id);
  return loop->call([&loop](Session&) {
    return loop->apply(
        [&](Session& s) { return s.tick(loop->gateway(), loop->now()); },
        false);
  });
}

ordered_json Service::get_session_export(const std::string& session_id) {
  return loop_for(session_id)->call(
      [](Session& s) { return s.export_document(); });
}

Mode Service::session_mode(const std::string& session_id) {
  return loop_for(session_id)->call([](Session& s) { return s.mode(); });
}

bool Service::has_session(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  return loops_.count(session_id) > 0;
}

uint64_t Service::attach(const std::string& session_id, int64_t last_seq,
                         Sink sink) {
  auto loop = loop_for(session_id);
  return loop->call([&](Session&) {
    return loop->attach(last_seq, std::move(sink));
  });
}

void Service::detach(const std::string& session_id, uint64_t token) {
  auto loop = loop_for(session_id);
  loop->call([&](Session&) {
    loop->detach(token);
    return 0;
  });
}

}  // namespace parsejargon
