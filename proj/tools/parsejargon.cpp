// parsejargon: replay / diff / rate evaluation commands and the live service.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "parsejargon/error.hpp"
#include "parsejargon/eval.hpp"
#include "parsejargon/gateway.hpp"
#include "parsejargon/ingest.hpp"
#include "parsejargon/provider.hpp"
#include "parsejargon/server.hpp"
#include "parsejargon/service.hpp"

namespace pj = parsejargon;
using nlohmann::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitProvider = 3;

struct ProviderOptions {
  std::string provider = "live";
  std::string fixtures;
};

void add_provider_options(CLI::App* cmd, ProviderOptions& opts) {
  cmd->add_option("--provider", opts.provider, "Completion backend")
      ->check(CLI::IsMember({"live", "mock"}))
      ->capture_default_str();
  cmd->add_option("--fixtures", opts.fixtures,
                  "Mock fixture directory (default: $PARSEJARGON_FIXTURES)");
}

std::shared_ptr<pj::Gateway> make_gateway(const ProviderOptions& opts) {
  std::shared_ptr<pj::CompletionProvider> provider;
  if (opts.provider == "mock") {
    std::string dir = opts.fixtures;
    if (dir.empty()) {
      const char* env = std::getenv("PARSEJARGON_FIXTURES");
      if (env) dir = env;
    }
    if (dir.empty()) {
      throw pj::Error(pj::ErrorCode::InvalidArgument,
                      "--provider mock needs --fixtures or PARSEJARGON_FIXTURES");
    }
    provider = std::make_shared<pj::MockProvider>(dir);
  } else {
    provider = std::make_shared<pj::OpenAIProvider>(pj::LiveProviderConfig::from_env());
  }
  return std::make_shared<pj::Gateway>(provider, pj::completion_params_from_env());
}

void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw pj::Error(pj::ErrorCode::InvalidArgument, "cannot write " + path);
  out << content << '\n';
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pj::Error(pj::ErrorCode::ParseError, "cannot open " + path);
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw pj::Error(pj::ErrorCode::ParseError, "invalid JSON in " + path);
  return j;
}

std::atomic<pj::Server*> g_server{nullptr};

void on_signal(int) {
  if (auto* server = g_server.load()) server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time jargon identification, personalization and evaluation"};
  app.require_subcommand(1);

  // replay
  auto* replay = app.add_subcommand("replay", "Replay a transcript and write a session report");
  pj::ReplayOptions replay_opts;
  std::string replay_transcript, replay_profile, replay_mode, replay_out;
  ProviderOptions replay_provider;
  replay->add_option("--transcript", replay_transcript, "Replay file (JSON lines)")->required();
  replay->add_option("--profile", replay_profile, "Profile file (JSON or plain text)");
  replay->add_option("--mode", replay_mode)->required()->check(CLI::IsMember({"general", "personalized"}));
  replay->add_flag("--realtime", replay_opts.realtime, "Pace chunks by their timestamps");
  replay->add_option("--out", replay_out, "Report path, or - for stdout")->required();
  add_provider_options(replay, replay_provider);

  // diff
  auto* diff = app.add_subcommand("diff", "Compare general and personalized reports");
  std::string diff_general, diff_personalized, diff_out = "-";
  diff->add_option("--general", diff_general)->required();
  diff->add_option("--personalized", diff_personalized)->required();
  diff->add_option("--out", diff_out)->capture_default_str();

  // rate
  auto* rate = app.add_subcommand("rate", "Helpful rates from rating sheets");
  std::vector<std::string> rate_sheets, rate_reports;
  std::string rate_out = "-";
  rate->add_option("--sheets", rate_sheets)->required();
  rate->add_option("--reports", rate_reports, "Reports to validate rated terms against");
  rate->add_option("--out", rate_out)->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP and stream service");
  serve->set_config("--config", "", "TOML/INI config file");
  pj::ServerConfig server_config;
  pj::ServiceConfig service_config;
  std::string db_path = "parsejargon.db";
  ProviderOptions serve_provider;
  serve->add_option("--host", server_config.host)->capture_default_str();
  serve->add_option("--http-port", server_config.http_port)->capture_default_str();
  serve->add_option("--stream-port", server_config.stream_port)->capture_default_str();
  serve->add_option("--db", db_path, "SQLite database path")->capture_default_str();
  serve->add_option("--tick-ms", service_config.tick_ms)->capture_default_str()->check(CLI::PositiveNumber);
  serve->add_option("--min-display-ms", service_config.session.min_display_ms)
      ->capture_default_str()->check(CLI::PositiveNumber);
  serve->add_option("--silence-flush-ms", service_config.session.silence_flush_ms)
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  add_provider_options(serve, serve_provider);

  // stream
  auto* stream = app.add_subcommand("stream", "Send a replay file to a live session");
  std::string stream_host = "127.0.0.1", stream_session, stream_transcript;
  int stream_port = 8081;
  bool stream_end = false;
  stream->add_option("--host", stream_host)->capture_default_str();
  stream->add_option("--port", stream_port)->capture_default_str();
  stream->add_option("--session", stream_session)->required();
  stream->add_option("--transcript", stream_transcript)->required();
  stream->add_flag("--end", stream_end, "Send end_session after the last chunk");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitInput;
  }

  try {
    if (*replay) {
      replay_opts.transcript = replay_transcript;
      if (!replay_profile.empty()) replay_opts.profile = replay_profile;
      replay_opts.mode = replay_mode == "personalized" ? pj::Mode::Personalized : pj::Mode::General;
      replay_opts.record_latency = replay_provider.provider == "live";
      auto gateway = make_gateway(replay_provider);
      auto report = pj::run_replay(replay_opts, *gateway);
      write_output(replay_out, report.to_json().dump(2));
      return report.stats.provider_failures > 0 ? kExitProvider : 0;
    }
    if (*diff) {
      auto general = pj::SessionReport::from_json(read_json_file(diff_general));
      auto personalized = pj::SessionReport::from_json(read_json_file(diff_personalized));
      write_output(diff_out, pj::compare_modes(general, personalized).to_json().dump(2));
      return 0;
    }
    if (*rate) {
      std::vector<pj::RatingSheet> sheets;
      for (const auto& path : rate_sheets) sheets.push_back(pj::load_rating_sheet(path));
      for (const auto& path : rate_reports) {
        auto report = pj::SessionReport::from_json(read_json_file(path));
        for (const auto& sheet : sheets) {
          if (sheet.session == report.label) pj::validate_sheet(sheet, report);
        }
      }
      write_output(rate_out, pj::compute_helpful_rate(sheets).to_json().dump(2));
      return 0;
    }
    if (*serve) {
      auto gateway = make_gateway(serve_provider);
      auto storage = std::make_shared<pj::SqliteStorage>(db_path);
      auto service = std::make_shared<pj::Service>(gateway, storage, service_config);
      pj::Server server(service, server_config);
      server.start();
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "http on " << server_config.host << ":" << server.http_port()
                << ", stream on " << server_config.host << ":" << server.stream_port() << '\n';
      server.wait();
      g_server = nullptr;
      return 0;
    }
    if (*stream) {
      pj::StreamClient client(stream_host, stream_port);
      client.send({stream_session, pj::protocol::Attach{-1}});
      for (const auto& chunk : pj::load_replay(stream_transcript, stream_session)) {
        client.send({stream_session, pj::protocol::Caption{chunk.text, chunk.t_ms}});
      }
      if (stream_end) client.send({stream_session, pj::protocol::EndSession{}});
      while (auto msg = client.receive(std::chrono::milliseconds(2000))) {
        std::cout << msg->dump() << '\n';
      }
      return 0;
    }
  } catch (const pj::ProviderError& e) {
    std::cerr << "provider failure: " << e.what() << '\n';
    return kExitProvider;
  } catch (const pj::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
