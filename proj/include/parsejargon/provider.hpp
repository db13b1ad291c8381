#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "parsejargon/prompts.hpp"

namespace parsejargon {

enum class ProviderErrorKind { Timeout, RateLimited, Transport, MalformedResponse };

std::string_view to_string(ProviderErrorKind kind);

class ProviderError : public std::runtime_error {
 public:
  ProviderError(ProviderErrorKind kind, const std::string& detail);

  ProviderErrorKind kind() const noexcept { return kind_; }
  /// Malformed responses are never retried at the transport level.
  bool retryable() const noexcept {
    return kind_ != ProviderErrorKind::MalformedResponse;
  }

 private:
  ProviderErrorKind kind_;
};

struct CompletionParams {
  double temperature = 0.1;
  int max_tokens = 1000;
  std::string model_name = "gpt-4o-mini";

  /// Throws InvalidArgument unless temperature is in [0, 2] and max_tokens >= 1.
  void validate() const;
};

struct RetryPolicy {
  int retry_max = 2;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds call_timeout{15000};

  /// initial_backoff * 2^attempt, attempt counted from 0.
  std::chrono::milliseconds backoff_for(int attempt) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual std::string complete(const Messages& messages,
                               const CompletionParams& params,
                               std::chrono::milliseconds timeout) = 0;
};

/// Calls the provider, retrying retryable failures up to retry_max times with
/// exponential backoff. The last error is rethrown.
std::string complete(CompletionProvider& provider, const Messages& messages,
                     const CompletionParams& params, const RetryPolicy& policy,
                     const Sleeper& sleep = {});

/// Stable 64-bit FNV-1a over system, a unit separator, then user; 16 hex chars.
std::string message_key(const Messages& messages);

// Deterministic provider answering from fixture files.
//
// Each *.json file in the fixture directory holds an array of entries (or an
// object with an "entries" array). An entry has a "response" (string, or any
// JSON value which is serialized) plus one way to address it:
//   {"key": "<message_key>"}
//   {"system": ..., "user": ...}
//   {"prompt": "identify", "transcript": ..., "defined_terms": [...],
//    "preferences": ...}
//   {"prompt": "identify", "transcript": ...}   matches any defined terms and
//                                               preferences, after exact keys
//   {"prompt": "filter", "background": ..., "glossary": [{"t": "d"}, ...]}
//   {"prompt": "identify" | "filter", "default": true}
// Lookups that find nothing raise MalformedResponse.
class MockProvider : public CompletionProvider {
 public:
  MockProvider() = default;
  explicit MockProvider(const std::filesystem::path& fixture_dir);

  void add_entries(const nlohmann::json& entries);
  void add_response(const Messages& messages, std::string response);

  std::string complete(const Messages& messages, const CompletionParams& params,
                       std::chrono::milliseconds timeout) override;

  std::size_t call_count() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::string> by_key_;
  std::unordered_map<std::string, std::string> by_transcript_;
  std::optional<std::string> identify_default_;
  std::optional<std::string> filter_default_;
  std::size_t calls_ = 0;
};

/// Connection settings for an OpenAI-compatible chat completions endpoint.
struct LiveProviderConfig {
  std::string api_key;
  std::string base_url = "https://api.openai.com/v1";

  /// Reads PARSEJARGON_API_KEY (falling back to OPENAI_API_KEY) and
  /// PARSEJARGON_BASE_URL.
  static LiveProviderConfig from_env();
};

/// Builds the JSON request body sent to /chat/completions.
nlohmann::json chat_request_body(const Messages& messages,
                                 const CompletionParams& params);

class OpenAIProvider : public CompletionProvider {
 public:
  explicit OpenAIProvider(LiveProviderConfig config);

  std::string complete(const Messages& messages, const CompletionParams& params,
                       std::chrono::milliseconds timeout) override;

 private:
  LiveProviderConfig config_;
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // e.g. /v1
};

/// Reads PARSEJARGON_MODEL over the defaults.
CompletionParams completion_params_from_env();

}  // namespace parsejargon
