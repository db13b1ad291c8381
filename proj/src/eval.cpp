#include "parsejargon/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "parsejargon/error.hpp"
#include "parsejargon/gateway.hpp"
#include "parsejargon/ingest.hpp"
#include "parsejargon/protocol.hpp"

namespace parsejargon {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Mode mode_from_string(const std::string& s) {
  if (s == "general") return Mode::General;
  if (s == "personalized") return Mode::Personalized;
  throw Error(ErrorCode::ParseError, "unknown mode '" + s + "'");
}

std::string fixed(double value, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << value;
  return out.str();
}

}  // namespace

// --- SessionReport ---------------------------------------------------------

ordered_json SessionReport::to_json() const {
  ordered_json j;
  j["label"] = label;
  j["mode"] = to_string(mode);
  j["term_count"] = term_count();
  j["glossary"] = ordered_json::array();
  for (const auto& e : glossary) j["glossary"].push_back(protocol::to_json(e));
  j["candidates"] = ordered_json::array();
  for (const auto& c : candidates) {
    ordered_json item;
    item[c.term] = c.definition;
    j["candidates"].push_back(std::move(item));
  }
  j["understood_dropped"] = understood_dropped;
  j["diagnostics"] = ordered_json::array();
  for (const auto& d : diagnostics) {
    j["diagnostics"].push_back(protocol::to_json(d));
  }
  ordered_json s;
  s["segments"] = stats.segments;
  s["identify_calls"] = stats.identify_calls;
  s["filter_calls"] = stats.filter_calls;
  s["skipped_segments"] = stats.skipped_segments;
  s["provider_failures"] = stats.provider_failures;
  if (!stats.latency_ms.empty()) {
    auto sorted = stats.latency_ms;
    std::sort(sorted.begin(), sorted.end());
    ordered_json lat;
    lat["mean"] = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
                  static_cast<double>(sorted.size());
    lat["p50"] = sorted[sorted.size() / 2];
    lat["max"] = sorted.back();
    s["latency_ms"] = std::move(lat);
  }
  j["stats"] = std::move(s);
  return j;
}

SessionReport SessionReport::from_json(const json& j) {
  try {
    SessionReport report;
    report.label = j.at("label");
    report.mode = mode_from_string(j.at("mode"));
    for (const auto& e : j.at("glossary")) {
      report.glossary.push_back({e.at("term"), e.at("key"), e.at("definition"),
                                 e.at("origin_seq"), e.at("identified_at_ms")});
    }
    if (j.contains("candidates")) {
      for (const auto& c : j.at("candidates")) {
        for (const auto& [term, definition] : c.items()) {
          report.candidates.push_back({term, definition.get<std::string>()});
        }
      }
    }
    if (j.contains("understood_dropped")) {
      report.understood_dropped =
          j.at("understood_dropped").get<std::vector<std::string>>();
    }
    if (j.contains("stats")) {
      const auto& s = j.at("stats");
      report.stats.segments = s.value("segments", std::size_t{0});
      report.stats.identify_calls = s.value("identify_calls", std::size_t{0});
      report.stats.filter_calls = s.value("filter_calls", std::size_t{0});
      report.stats.skipped_segments = s.value("skipped_segments", std::size_t{0});
      report.stats.provider_failures =
          s.value("provider_failures", std::size_t{0});
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report: ") + e.what());
  }
}

// --- replay ----------------------------------------------------------------

UserProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();
  auto j = json::parse(content, nullptr, false);
  if (!j.is_discarded() && j.is_object()) {
    try {
      return protocol::profile_from_json(j);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError,
                  "profile " + path.string() + ": " + std::string(e.detail()));
    }
  }
  UserProfile profile;
  profile.background_text = content;
  return profile;
}

SessionReport run_replay(const ReplayOptions& options, const Gateway& gateway) {
  SessionState state;
  state.session_id = options.label.value_or(options.transcript.stem().string());
  if (options.mode == Mode::Personalized) {
    if (!options.profile) {
      throw Error(ErrorCode::MissingProfile,
                  "personalized mode requires --profile");
    }
    state.profile = load_profile(*options.profile);
    if (!state.profile.has_background()) {
      throw Error(ErrorCode::MissingProfile, "profile has no background text");
    }
  }

  const auto chunks = load_replay(options.transcript, state.session_id);
  SegmentationBuffer buffer(state.session_id, options.silence_flush_ms);

  SessionReport report;
  report.label = state.session_id;
  report.mode = options.mode;
  std::set<std::string> candidate_keys;
  const std::size_t identify_before = gateway.identify_calls();
  const std::size_t filter_before = gateway.filter_calls();

  auto run = [&](const TranscriptSegment& segment) {
    const auto started = std::chrono::steady_clock::now();
    auto [next, delta] =
        process_segment(state, segment, gateway, segment.t_end_ms);
    state = std::move(next);
    if (options.record_latency) {
      report.stats.latency_ms.push_back(
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - started)
              .count());
    }
    ++report.stats.segments;
    for (auto& c : delta.candidates) {
      if (candidate_keys.insert(normalize_term(c.term)).second) {
        report.candidates.push_back(std::move(c));
      }
    }
    for (auto& u : delta.understood_dropped) {
      report.understood_dropped.push_back(std::move(u));
    }
    for (auto& d : delta.diagnostics) {
      ++report.stats.skipped_segments;
      if (d.code == "provider_error") ++report.stats.provider_failures;
      report.diagnostics.push_back(std::move(d));
    }
  };

  const auto wall_start = std::chrono::steady_clock::now();
  const int64_t first_t = chunks.front().t_ms;
  for (const auto& chunk : chunks) {
    if (options.realtime) {
      std::this_thread::sleep_until(
          wall_start + std::chrono::milliseconds(chunk.t_ms - first_t));
    }
    if (auto flushed = buffer.flush(chunk.t_ms)) run(*flushed);
    for (const auto& segment : buffer.ingest(chunk)) run(segment);
  }
  if (auto flushed = buffer.force_flush()) run(*flushed);

  report.glossary = state.glossary;
  report.stats.identify_calls = gateway.identify_calls() - identify_before;
  report.stats.filter_calls = gateway.filter_calls() - filter_before;
  return report;
}

// --- diff ------------------------------------------------------------------

ordered_json DiffReport::to_json() const {
  ordered_json j;
  j["label"] = label;
  j["kept"] = kept;
  j["removed"] = removed;
  j["added"] = added;
  j["anomalies"] = added;
  return j;
}

DiffReport compare_modes(const SessionReport& general,
                         const SessionReport& personalized) {
  if (general.label != personalized.label) {
    throw Error(ErrorCode::LabelMismatch,
                "'" + general.label + "' vs '" + personalized.label + "'");
  }
  std::set<std::string> general_keys;
  std::set<std::string> personalized_keys;
  for (const auto& e : general.glossary) general_keys.insert(normalize_term(e.term));
  for (const auto& e : personalized.glossary) {
    personalized_keys.insert(normalize_term(e.term));
  }

  DiffReport diff;
  diff.label = general.label;
  for (const auto& e : general.glossary) {
    (personalized_keys.count(normalize_term(e.term)) ? diff.kept : diff.removed)
        .push_back(e.term);
  }
  for (const auto& e : personalized.glossary) {
    if (!general_keys.count(normalize_term(e.term))) diff.added.push_back(e.term);
  }
  return diff;
}

// --- helpful rate ----------------------------------------------------------

RatingSheet RatingSheet::from_json(const json& j) {
  if (!j.is_object() || !j.contains("session") || !j.contains("ratings") ||
      !j["session"].is_string() || !j["ratings"].is_object()) {
    throw Error(ErrorCode::ParseError,
                "rating sheet needs {\"session\", \"ratings\": {term: rating}}");
  }
  RatingSheet sheet;
  sheet.session = j["session"];
  for (const auto& [term, value] : j["ratings"].items()) {
    Rating rating;
    if (value == "helpful") {
      rating = Rating::Helpful;
    } else if (value == "not_helpful") {
      rating = Rating::NotHelpful;
    } else {
      throw Error(ErrorCode::ParseError,
                  "rating for '" + term + "' must be helpful or not_helpful");
    }
    sheet.ratings.emplace_back(normalize_term(term), rating);
  }
  return sheet;
}

RatingSheet load_rating_sheet(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::ParseError, "invalid JSON in " + path.string());
  }
  return RatingSheet::from_json(j);
}

void validate_sheet(const RatingSheet& sheet, const SessionReport& report) {
  std::set<std::string> keys;
  for (const auto& e : report.glossary) keys.insert(normalize_term(e.term));
  for (const auto& [key, _] : sheet.ratings) {
    if (!keys.count(key)) {
      throw Error(ErrorCode::InvalidArgument,
                  "'" + key + "' is not in the glossary of " + report.label);
    }
  }
}

HelpfulRateSummary compute_helpful_rate(const std::vector<RatingSheet>& sheets) {
  if (sheets.empty()) throw Error(ErrorCode::EmptySheet, "no rating sheets");
  HelpfulRateSummary summary;
  double rate_sum = 0.0;
  for (const auto& sheet : sheets) {
    if (sheet.ratings.empty()) {
      throw Error(ErrorCode::EmptySheet, "session '" + sheet.session + "'");
    }
    const auto helpful = static_cast<std::size_t>(
        std::count_if(sheet.ratings.begin(), sheet.ratings.end(),
                      [](const auto& r) { return r.second == Rating::Helpful; }));
    const double rate =
        static_cast<double>(helpful) / static_cast<double>(sheet.ratings.size());
    summary.sessions.push_back(sheet.session);
    summary.per_session_rates.push_back(rate);
    summary.total_helpful += helpful;
    summary.total_rated += sheet.ratings.size();
    rate_sum += rate;
  }
  summary.macro_rate = rate_sum / static_cast<double>(sheets.size());
  summary.micro_rate = static_cast<double>(summary.total_helpful) /
                       static_cast<double>(summary.total_rated);
  return summary;
}

ordered_json HelpfulRateSummary::to_json() const {
  ordered_json j;
  j["sessions"] = ordered_json::array();
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    ordered_json s;
    s["session"] = sessions[i];
    s["rate"] = per_session_rates[i];
    j["sessions"].push_back(std::move(s));
  }
  j["macro_rate"] = macro_rate;
  j["micro_rate"] = micro_rate;
  j["total_helpful"] = total_helpful;
  j["total_rated"] = total_rated;
  j["consistency_check"] = rate_consistency_note();
  return j;
}

const std::vector<PublishedRateCheck>& published_rate_checks() {
  static const std::vector<PublishedRateCheck> checks{
      {"general", 10.29, 22.57, 0.4703},
      {"personalized", 7.64, 9.71, 0.7751},
  };
  return checks;
}

ordered_json rate_consistency_note() {
  ordered_json j;
  j["explanation"] =
      "macro = mean of per-session rates; micro = pooled helpful / pooled "
      "total. The published mean counts do not divide to the published "
      "rates, so those rates are macro averages. Both are reported here.";
  j["published"] = ordered_json::array();
  for (const auto& check : published_rate_checks()) {
    ordered_json c;
    c["condition"] = check.condition;
    c["mean_helpful"] = check.mean_helpful;
    c["mean_total"] = check.mean_total;
    c["pooled_ratio"] = std::round(check.pooled_ratio() * 1000.0) / 1000.0;
    c["published_rate"] = check.published_rate;
    c["note"] = "mean counts " + fixed(check.mean_helpful, 2) + "/" +
                fixed(check.mean_total, 2) + " give micro " +
                fixed(check.pooled_ratio(), 3) + " vs published macro " +
                fixed(check.published_rate * 100.0, 2) + "%";
    j["published"].push_back(std::move(c));
  }
  return j;
}

}  // namespace parsejargon
