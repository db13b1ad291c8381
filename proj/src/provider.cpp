#include "parsejargon/provider.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "parsejargon/error.hpp"

namespace parsejargon {

using nlohmann::json;

std::string_view to_string(ProviderErrorKind kind) {
  switch (kind) {
    case ProviderErrorKind::Timeout: return "timeout";
    case ProviderErrorKind::RateLimited: return "rate_limited";
    case ProviderErrorKind::Transport: return "transport";
    case ProviderErrorKind::MalformedResponse: return "malformed_response";
  }
  return "unknown";
}

ProviderError::ProviderError(ProviderErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind) {}

void CompletionParams::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature must be in [0, 2]");
  }
  if (max_tokens < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_tokens must be >= 1");
  }
}

std::chrono::milliseconds RetryPolicy::backoff_for(int attempt) const {
  return initial_backoff * (int64_t{1} << attempt);
}

std::string complete(CompletionProvider& provider, const Messages& messages,
                     const CompletionParams& params, const RetryPolicy& policy,
                     const Sleeper& sleep) {
  params.validate();
  for (int attempt = 0;; ++attempt) {
    try {
      return provider.complete(messages, params, policy.call_timeout);
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt >= policy.retry_max) throw;
    }
    auto delay = policy.backoff_for(attempt);
    if (sleep) {
      sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
  }
}

std::string message_key(const Messages& messages) {
  uint64_t hash = 14695981039346656037ull;
  auto mix = [&hash](std::string_view s) {
    for (unsigned char c : s) {
      hash ^= c;
      hash *= 1099511628211ull;
    }
  };
  mix(messages.system);
  mix("\x1f");
  mix(messages.user);
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

// --- MockProvider ----------------------------------------------------------

MockProvider::MockProvider(const std::filesystem::path& fixture_dir) {
  if (!std::filesystem::is_directory(fixture_dir)) {
    throw Error(ErrorCode::InvalidArgument,
                "fixture directory not found: " + fixture_dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(fixture_dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream in(file);
    auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::ParseError, "invalid fixture " + file.string());
    }
    add_entries(j.is_object() && j.contains("entries") ? j["entries"] : j);
  }
}

void MockProvider::add_entries(const json& entries) {
  if (!entries.is_array()) {
    throw Error(ErrorCode::ParseError, "fixture entries must be an array");
  }
  std::lock_guard lock(mutex_);
  for (const auto& e : entries) {
    if (!e.is_object() || !e.contains("response")) {
      throw Error(ErrorCode::ParseError, "fixture entry without response");
    }
    const auto& r = e["response"];
    std::string response = r.is_string() ? r.get<std::string>() : r.dump();
    const std::string prompt = e.value("prompt", "");

    if (e.value("default", false)) {
      if (prompt == "identify") {
        identify_default_ = response;
      } else if (prompt == "filter") {
        filter_default_ = response;
      } else {
        throw Error(ErrorCode::ParseError, "default entry needs a prompt kind");
      }
    } else if (e.contains("key")) {
      by_key_[e["key"].get<std::string>()] = response;
    } else if (e.contains("system") && e.contains("user")) {
      by_key_[message_key({e["system"], e["user"]})] = response;
    } else if (prompt == "identify") {
      const std::string transcript = e.at("transcript");
      if (!e.contains("defined_terms") && !e.contains("preferences")) {
        by_transcript_[transcript] = response;
      } else {
        auto defined =
            e.value("defined_terms", std::vector<std::string>{});
        auto msgs = render_identify_prompt(transcript, defined,
                                           e.value("preferences", "none"));
        by_key_[message_key(msgs)] = response;
      }
    } else if (prompt == "filter") {
      TermList glossary;
      for (const auto& item : e.at("glossary")) {
        for (const auto& [term, definition] : item.items()) {
          glossary.push_back({term, definition.get<std::string>()});
        }
      }
      auto msgs = render_filter_prompt(e.at("background").get<std::string>(),
                                       glossary);
      by_key_[message_key(msgs)] = response;
    } else {
      throw Error(ErrorCode::ParseError, "fixture entry has no address");
    }
  }
}

void MockProvider::add_response(const Messages& messages,
                                std::string response) {
  std::lock_guard lock(mutex_);
  by_key_[message_key(messages)] = std::move(response);
}

std::string MockProvider::complete(const Messages& messages,
                                   const CompletionParams&,
                                   std::chrono::milliseconds) {
  std::lock_guard lock(mutex_);
  ++calls_;
  const std::string key = message_key(messages);
  if (auto it = by_key_.find(key); it != by_key_.end()) return it->second;

  const bool is_identify = messages.system == identify_template().system_message;
  if (is_identify) {
    static constexpr std::string_view kPrefix = "Transcript: ";
    static constexpr std::string_view kSuffix = ", Previously define terms: ";
    const auto end = messages.user.rfind(kSuffix);
    if (messages.user.rfind(kPrefix, 0) == 0 && end != std::string::npos) {
      std::string transcript =
          messages.user.substr(kPrefix.size(), end - kPrefix.size());
      if (auto it = by_transcript_.find(transcript);
          it != by_transcript_.end()) {
        return it->second;
      }
    }
    if (identify_default_) return *identify_default_;
  } else if (filter_default_) {
    return *filter_default_;
  }
  throw ProviderError(ProviderErrorKind::MalformedResponse,
                      "no fixture for message key " + key);
}

std::size_t MockProvider::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

// --- OpenAIProvider --------------------------------------------------------

namespace {
std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}
}  // namespace

LiveProviderConfig LiveProviderConfig::from_env() {
  LiveProviderConfig config;
  config.api_key = env_or("PARSEJARGON_API_KEY", env_or("OPENAI_API_KEY", ""));
  config.base_url = env_or("PARSEJARGON_BASE_URL", config.base_url);
  return config;
}

CompletionParams completion_params_from_env() {
  CompletionParams params;
  params.model_name = env_or("PARSEJARGON_MODEL", params.model_name);
  return params;
}

json chat_request_body(const Messages& messages,
                       const CompletionParams& params) {
  return {{"model", params.model_name},
          {"messages",
           json::array({{{"role", "system"}, {"content", messages.system}},
                        {{"role", "user"}, {"content", messages.user}}})},
          {"temperature", params.temperature},
          {"max_tokens", params.max_tokens}};
}

OpenAIProvider::OpenAIProvider(LiveProviderConfig config)
    : config_(std::move(config)) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument,
                "base URL needs a scheme: " + config_.base_url);
  }
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  origin_ = config_.base_url.substr(0, path_start);
  if (path_start != std::string::npos) {
    path_prefix_ = config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') {
      path_prefix_.pop_back();
    }
  }
}

std::string OpenAIProvider::complete(const Messages& messages,
                                     const CompletionParams& params,
                                     std::chrono::milliseconds timeout) {
  httplib::Client client(origin_);
  const auto seconds =
      std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
                          timeout % std::chrono::seconds(1))
                          .count();
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);

  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                         chat_request_body(messages, params).dump(),
                         "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           err == httplib::Error::Read;
    throw ProviderError(
        timed_out ? ProviderErrorKind::Timeout : ProviderErrorKind::Transport,
        httplib::to_string(err));
  }
  if (res->status == 429) {
    throw ProviderError(ProviderErrorKind::RateLimited, res->body);
  }
  if (res->status >= 500) {
    throw ProviderError(ProviderErrorKind::Transport,
                        "HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProviderError(ProviderErrorKind::MalformedResponse,
                        "HTTP " + std::to_string(res->status) + ": " +
                            res->body);
  }
  auto body = json::parse(res->body, nullptr, false);
  try {
    return body.at("choices").at(0).at("message").at("content");
  } catch (const json::exception& e) {
    throw ProviderError(ProviderErrorKind::MalformedResponse, e.what());
  }
}

}  // namespace parsejargon
