#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parsejargon/pipeline.hpp"

namespace parsejargon {

class Gateway;

struct ReplayStats {
  std::size_t segments = 0;
  std::size_t identify_calls = 0;
  std::size_t filter_calls = 0;
  std::size_t skipped_segments = 0;
  std::size_t provider_failures = 0;
  /// Per-segment wall time; only filled when latency recording is on.
  std::vector<double> latency_ms;
};

struct SessionReport {
  std::string label;
  Mode mode = Mode::General;
  std::vector<TermEntry> glossary;
  /// Identification output over the whole replay, before personalization.
  TermList candidates;
  std::vector<std::string> understood_dropped;
  std::vector<Diagnostic> diagnostics;
  ReplayStats stats;

  std::size_t term_count() const { return glossary.size(); }

  nlohmann::ordered_json to_json() const;
  static SessionReport from_json(const nlohmann::json& j);
};

struct ReplayOptions {
  std::filesystem::path transcript;
  std::optional<std::filesystem::path> profile;
  Mode mode = Mode::General;
  /// Sleep between chunks to follow their recorded timestamps.
  bool realtime = false;
  bool record_latency = false;
  int64_t silence_flush_ms = kDefaultSilenceFlushMs;
  /// Defaults to the transcript file stem.
  std::optional<std::string> label;
};

/// A profile file is either a JSON object {"background", "liked"?,
/// "disliked"?} or plain text taken as the background.
UserProfile load_profile(const std::filesystem::path& path);

/// Replays a transcript through ingest and the pipeline. Throws the ingest
/// file errors, and MissingProfile for personalized mode without a profile
/// (or with an empty background).
SessionReport run_replay(const ReplayOptions& options, const Gateway& gateway);

struct DiffReport {
  std::string label;
  std::vector<std::string> kept;
  std::vector<std::string> removed;
  /// Terms only the personalized glossary has; personalization should never
  /// produce any, so each one is an anomaly.
  std::vector<std::string> added;

  const std::vector<std::string>& anomalies() const { return added; }
  nlohmann::ordered_json to_json() const;
};

/// Throws LabelMismatch when the reports come from different transcripts.
DiffReport compare_modes(const SessionReport& general,
                         const SessionReport& personalized);

enum class Rating { Helpful, NotHelpful };

struct RatingSheet {
  std::string session;
  /// Normalized term key → rating, in file order.
  std::vector<std::pair<std::string, Rating>> ratings;

  static RatingSheet from_json(const nlohmann::json& j);
};

RatingSheet load_rating_sheet(const std::filesystem::path& path);

/// Throws InvalidArgument if a rated term is missing from the glossary.
void validate_sheet(const RatingSheet& sheet, const SessionReport& report);

struct HelpfulRateSummary {
  std::vector<std::string> sessions;
  std::vector<double> per_session_rates;
  double macro_rate = 0.0;  // mean of per-session rates
  double micro_rate = 0.0;  // pooled helpful / pooled total
  std::size_t total_helpful = 0;
  std::size_t total_rated = 0;

  nlohmann::ordered_json to_json() const;
};

/// Throws EmptySheet if there are no sheets or any sheet has no ratings.
HelpfulRateSummary compute_helpful_rate(const std::vector<RatingSheet>& sheets);

/// Pooled-ratio check on the published mean glossary counts: dividing the
/// mean helpful count by the mean total does not reproduce the published
/// rate, which is therefore an average of per-session rates.
struct PublishedRateCheck {
  std::string condition;
  double mean_helpful;
  double mean_total;
  double published_rate;

  double pooled_ratio() const { return mean_helpful / mean_total; }
};

const std::vector<PublishedRateCheck>& published_rate_checks();
nlohmann::ordered_json rate_consistency_note();

}  // namespace parsejargon
