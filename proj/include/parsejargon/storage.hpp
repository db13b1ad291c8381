#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace parsejargon {

struct SessionRecord {
  std::string session_id;
  std::string created_at;  // ISO-8601 UTC
  std::string mode;
  nlohmann::json profile;
  std::string status;  // "live" | "ended"
};

// Durable session store. `commit` is atomic: the snapshot and the server
// messages it produced land together or not at all. All failures surface as
// StorageUnavailable.
class Storage {
 public:
  virtual ~Storage() = default;

  /// Throws StorageUnavailable if the id already exists.
  virtual void create(const SessionRecord& record,
                      const nlohmann::json& snapshot) = 0;
  virtual void commit(const SessionRecord& record,
                      const nlohmann::json& snapshot,
                      const std::vector<std::string>& server_messages,
                      int64_t first_seq) = 0;
  virtual bool exists(const std::string& session_id) = 0;
  virtual std::vector<std::string> session_ids() = 0;
  virtual std::optional<nlohmann::json> load_snapshot(
      const std::string& session_id) = 0;
  /// Serialized server messages with seq > after_seq, in seq order.
  virtual std::vector<std::string> messages_after(const std::string& session_id,
                                                  int64_t after_seq) = 0;
};

class MemoryStorage : public Storage {
 public:
  void create(const SessionRecord& record,
              const nlohmann::json& snapshot) override;
  void commit(const SessionRecord& record, const nlohmann::json& snapshot,
              const std::vector<std::string>& server_messages,
              int64_t first_seq) override;
  bool exists(const std::string& session_id) override;
  std::vector<std::string> session_ids() override;
  std::optional<nlohmann::json> load_snapshot(
      const std::string& session_id) override;
  std::vector<std::string> messages_after(const std::string& session_id,
                                          int64_t after_seq) override;

  /// Fails every subsequent write, for error-path tests.
  void set_unavailable(bool unavailable);

 private:
  struct Entry {
    SessionRecord record;
    nlohmann::json snapshot;
    std::map<int64_t, std::string> messages;
  };
  std::mutex mutex_;
  std::map<std::string, Entry> sessions_;
  bool unavailable_ = false;
};

class SqliteStorage : public Storage {
 public:
  explicit SqliteStorage(const std::filesystem::path& path);
  ~SqliteStorage() override;
  SqliteStorage(const SqliteStorage&) = delete;
  SqliteStorage& operator=(const SqliteStorage&) = delete;

  void create(const SessionRecord& record,
              const nlohmann::json& snapshot) override;
  void commit(const SessionRecord& record, const nlohmann::json& snapshot,
              const std::vector<std::string>& server_messages,
              int64_t first_seq) override;
  bool exists(const std::string& session_id) override;
  std::vector<std::string> session_ids() override;
  std::optional<nlohmann::json> load_snapshot(
      const std::string& session_id) override;
  std::vector<std::string> messages_after(const std::string& session_id,
                                          int64_t after_seq) override;

 private:
  struct Db;
  std::mutex mutex_;
  std::unique_ptr<Db> db_;
};

}  // namespace parsejargon
