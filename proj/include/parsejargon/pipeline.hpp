#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "parsejargon/ingest.hpp"
#include "parsejargon/prompts.hpp"

namespace parsejargon {

class Gateway;

enum class Mode { General, Personalized };
enum class Verdict { Like, Dislike };

std::string_view to_string(Mode mode);
std::string_view to_string(Verdict verdict);
Verdict verdict_from_string(std::string_view s);  // throws InvalidArgument

/// Case-folded, whitespace-collapsed, trimmed. No stemming.
std::string normalize_term(std::string_view term);

struct UserProfile {
  std::string background_text;
  std::vector<std::string> liked_terms;     // normalized keys, insertion order
  std::vector<std::string> disliked_terms;  // disjoint from liked_terms

  bool has_background() const;
  std::optional<Verdict> verdict_for(const std::string& key) const;
  /// Moves `key` into the matching set and out of the other one.
  void set_verdict(const std::string& key, Verdict verdict);
  /// The {preferences} binding of the identification prompt.
  std::string preference_summary() const;

  bool operator==(const UserProfile&) const = default;
};

struct TermEntry {
  std::string term;  // as emitted by the model
  std::string key;   // normalize_term(term)
  std::string definition;
  int64_t origin_seq = 0;
  int64_t identified_at_ms = 0;

  bool operator==(const TermEntry&) const = default;
};

struct FeedbackEvent {
  std::string key;
  Verdict verdict = Verdict::Like;
  int64_t at_ms = 0;

  bool operator==(const FeedbackEvent&) const = default;
};

struct HighlightSpan {
  int64_t seq = 0;
  std::size_t start = 0;  // code point offsets, half-open
  std::size_t end = 0;
  std::string key;

  bool operator==(const HighlightSpan&) const = default;
};

struct Diagnostic {
  std::string code;
  std::string detail;
  std::optional<int64_t> seq;
};

struct SessionState {
  std::string session_id;
  UserProfile profile;
  std::vector<TermEntry> glossary;  // identification order
  std::set<std::string> defined_keys;
  std::vector<FeedbackEvent> feedback_log;
  int64_t next_seq_expected = 0;

  /// Personalized exactly when the profile carries a background.
  Mode mode() const;
  const TermEntry* find(const std::string& key) const;
};

struct PipelineDelta {
  std::vector<TermEntry> new_entries;
  std::vector<HighlightSpan> highlights;
  std::vector<std::string> understood_dropped;
  /// Identification output after dedup, before personalization.
  TermList candidates;
  std::vector<Diagnostic> diagnostics;

  bool empty() const {
    return new_entries.empty() && highlights.empty() &&
           understood_dropped.empty();
  }
};

/// Runs identify, dedup and (in personalized mode) the background filter for
/// one segment. `now_ms` becomes the identification time of new entries.
/// Throws SequenceGap if the segment is out of order. Gateway failures skip
/// the segment: only next_seq_expected advances, and the delta carries one
/// diagnostic coded "provider_error" or "malformed_output".
std::pair<SessionState, PipelineDelta> process_segment(
    const SessionState& state, const TranscriptSegment& segment,
    const Gateway& gateway, int64_t now_ms);

/// Throws UnknownTerm unless the key was defined in this session.
SessionState apply_feedback(const SessionState& state,
                            const FeedbackEvent& event);

/// Case-insensitive, word-bounded, longest-key-first matching on the
/// whitespace-normalized text. Spans never overlap and come back sorted.
std::vector<HighlightSpan> highlight_terms(std::string_view segment_text,
                                           const std::set<std::string>& keys,
                                           int64_t seq = 0);

/// [{"term", "definition", "origin_seq", "identified_at_ms", "verdict"}...]
nlohmann::ordered_json export_glossary(const SessionState& state);

}  // namespace parsejargon
