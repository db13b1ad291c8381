#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "parsejargon/error.hpp"
#include "parsejargon/provider.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return PARSEJARGON_TEST_DATA_DIR; }

inline std::filesystem::path earth_science() {
  return data_dir() / "fixtures" / "earth_science";
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "parsejargon_tests";
  std::filesystem::create_directories(dir);
  auto path = dir / name;
  std::filesystem::remove(path);
  return path;
}

// Provider backed by a callback; records every request.
class FnProvider : public parsejargon::CompletionProvider {
 public:
  using Fn = std::function<std::string(const parsejargon::Messages&)>;
  explicit FnProvider(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(const parsejargon::Messages& messages,
                       const parsejargon::CompletionParams& params,
                       std::chrono::milliseconds timeout) override {
    {
      std::lock_guard lock(mutex_);
      requests.push_back(messages);
      last_params = params;
      last_timeout = timeout;
    }
    return fn_(messages);
  }

  std::vector<parsejargon::Messages> requests;
  parsejargon::CompletionParams last_params;
  std::chrono::milliseconds last_timeout{0};

 private:
  Fn fn_;
  std::mutex mutex_;
};

template <class F>
std::optional<parsejargon::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const parsejargon::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline bool starts_with_transcript(const parsejargon::Messages& m) {
  return m.user.rfind("Transcript: ", 0) == 0;
}

}  // namespace testing
