#include "parsejargon/storage.hpp"

#include <sqlite3.h>

#include "parsejargon/error.hpp"

namespace parsejargon {

using nlohmann::json;

// --- MemoryStorage ---------------------------------------------------------

void MemoryStorage::create(const SessionRecord& record, const json& snapshot) {
  std::lock_guard lock(mutex_);
  if (unavailable_) throw Error(ErrorCode::StorageUnavailable, "offline");
  if (sessions_.count(record.session_id)) {
    throw Error(ErrorCode::StorageUnavailable,
                "duplicate session id " + record.session_id);
  }
  sessions_[record.session_id] = Entry{record, snapshot, {}};
}

void MemoryStorage::commit(const SessionRecord& record, const json& snapshot,
                           const std::vector<std::string>& server_messages,
                           int64_t first_seq) {
  std::lock_guard lock(mutex_);
  if (unavailable_) throw Error(ErrorCode::StorageUnavailable, "offline");
  auto it = sessions_.find(record.session_id);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::StorageUnavailable,
                "unknown session " + record.session_id);
  }
  for (std::size_t i = 0; i < server_messages.size(); ++i) {
    if (it->second.messages.count(first_seq + static_cast<int64_t>(i))) {
      throw Error(ErrorCode::StorageUnavailable, "duplicate message seq");
    }
  }
  it->second.record = record;
  it->second.snapshot = snapshot;
  for (std::size_t i = 0; i < server_messages.size(); ++i) {
    it->second.messages[first_seq + static_cast<int64_t>(i)] =
        server_messages[i];
  }
}

bool MemoryStorage::exists(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  return sessions_.count(session_id) > 0;
}

std::vector<std::string> MemoryStorage::session_ids() {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

std::optional<json> MemoryStorage::load_snapshot(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second.snapshot;
}

std::vector<std::string> MemoryStorage::messages_after(
    const std::string& session_id, int64_t after_seq) {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return out;
  for (auto m = it->second.messages.upper_bound(after_seq);
       m != it->second.messages.end(); ++m) {
    out.push_back(m->second);
  }
  return out;
}

void MemoryStorage::set_unavailable(bool unavailable) {
  std::lock_guard lock(mutex_);
  unavailable_ = unavailable;
}

// --- SqliteStorage ---------------------------------------------------------

namespace {

[[noreturn]] void fail(sqlite3* db, const std::string& what) {
  throw Error(ErrorCode::StorageUnavailable,
              what + ": " + (db ? sqlite3_errmsg(db) : "no database"));
}

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      fail(db, "prepare");
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int index, const std::string& value) {
    sqlite3_bind_text(stmt_, index, value.data(),
                      static_cast<int>(value.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Statement& bind(int index, int64_t value) {
    sqlite3_bind_int64(stmt_, index, value);
    return *this;
  }
  /// True while a row is available.
  bool step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    fail(db_, "step");
  }
  std::string text(int column) const {
    const auto* p = sqlite3_column_text(stmt_, column);
    return p ? std::string(reinterpret_cast<const char*>(p),
                           static_cast<size_t>(sqlite3_column_bytes(stmt_, column)))
             : std::string();
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "exec";
    sqlite3_free(err);
    throw Error(ErrorCode::StorageUnavailable, msg);
  }
}

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { exec(db_, "BEGIN IMMEDIATE"); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    exec(db_, "COMMIT");
    done_ = true;
  }

 private:
  sqlite3* db_;
  bool done_ = false;
};

}  // namespace

struct SqliteStorage::Db {
  sqlite3* handle = nullptr;
  ~Db() { sqlite3_close(handle); }
};

SqliteStorage::SqliteStorage(const std::filesystem::path& path)
    : db_(std::make_unique<Db>()) {
  if (sqlite3_open(path.string().c_str(), &db_->handle) != SQLITE_OK) {
    fail(db_->handle, "open " + path.string());
  }
  sqlite3_busy_timeout(db_->handle, 5000);
  exec(db_->handle, "PRAGMA journal_mode=WAL");
  exec(db_->handle,
       "CREATE TABLE IF NOT EXISTS sessions ("
       "  session_id TEXT PRIMARY KEY,"
       "  created_at TEXT NOT NULL,"
       "  mode TEXT NOT NULL,"
       "  profile TEXT NOT NULL,"
       "  status TEXT NOT NULL,"
       "  snapshot TEXT NOT NULL);"
       "CREATE TABLE IF NOT EXISTS server_messages ("
       "  session_id TEXT NOT NULL,"
       "  seq INTEGER NOT NULL,"
       "  body TEXT NOT NULL,"
       "  PRIMARY KEY (session_id, seq));");
}

SqliteStorage::~SqliteStorage() = default;

void SqliteStorage::create(const SessionRecord& record, const json& snapshot) {
  std::lock_guard lock(mutex_);
  Statement insert(db_->handle,
                   "INSERT INTO sessions (session_id, created_at, mode, "
                   "profile, status, snapshot) VALUES (?, ?, ?, ?, ?, ?)");
  insert.bind(1, record.session_id)
      .bind(2, record.created_at)
      .bind(3, record.mode)
      .bind(4, record.profile.dump())
      .bind(5, record.status)
      .bind(6, snapshot.dump());
  insert.step();
}

void SqliteStorage::commit(const SessionRecord& record, const json& snapshot,
                           const std::vector<std::string>& server_messages,
                           int64_t first_seq) {
  std::lock_guard lock(mutex_);
  Transaction tx(db_->handle);
  Statement update(db_->handle,
                   "UPDATE sessions SET mode = ?, profile = ?, status = ?, "
                   "snapshot = ? WHERE session_id = ?");
  update.bind(1, record.mode)
      .bind(2, record.profile.dump())
      .bind(3, record.status)
      .bind(4, snapshot.dump())
      .bind(5, record.session_id);
  update.step();
  if (sqlite3_changes(db_->handle) != 1) {
    throw Error(ErrorCode::StorageUnavailable,
                "unknown session " + record.session_id);
  }
  for (std::size_t i = 0; i < server_messages.size(); ++i) {
    Statement insert(db_->handle,
                     "INSERT INTO server_messages (session_id, seq, body) "
                     "VALUES (?, ?, ?)");
    insert.bind(1, record.session_id)
        .bind(2, first_seq + static_cast<int64_t>(i))
        .bind(3, server_messages[i]);
    insert.step();
  }
  tx.commit();
}

bool SqliteStorage::exists(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  Statement query(db_->handle, "SELECT 1 FROM sessions WHERE session_id = ?");
  query.bind(1, session_id);
  return query.step();
}

std::vector<std::string> SqliteStorage::session_ids() {
  std::lock_guard lock(mutex_);
  Statement query(db_->handle,
                  "SELECT session_id FROM sessions ORDER BY session_id");
  std::vector<std::string> ids;
  while (query.step()) ids.push_back(query.text(0));
  return ids;
}

std::optional<json> SqliteStorage::load_snapshot(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  Statement query(db_->handle,
                  "SELECT snapshot FROM sessions WHERE session_id = ?");
  query.bind(1, session_id);
  if (!query.step()) return std::nullopt;
  return json::parse(query.text(0));
}

std::vector<std::string> SqliteStorage::messages_after(
    const std::string& session_id, int64_t after_seq) {
  std::lock_guard lock(mutex_);
  Statement query(db_->handle,
                  "SELECT body FROM server_messages WHERE session_id = ? AND "
                  "seq > ? ORDER BY seq");
  query.bind(1, session_id).bind(2, after_seq);
  std::vector<std::string> out;
  while (query.step()) out.push_back(query.text(0));
  return out;
}

}  // namespace parsejargon
