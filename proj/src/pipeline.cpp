#include "parsejargon/pipeline.hpp"

#include <algorithm>

#include "parsejargon/error.hpp"
#include "parsejargon/gateway.hpp"
#include "parsejargon/text.hpp"

namespace parsejargon {

std::string_view to_string(Mode mode) {
  return mode == Mode::Personalized ? "personalized" : "general";
}

std::string_view to_string(Verdict verdict) {
  return verdict == Verdict::Like ? "like" : "dislike";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "like") return Verdict::Like;
  if (s == "dislike") return Verdict::Dislike;
  throw Error(ErrorCode::InvalidArgument, "verdict must be like or dislike");
}

std::string normalize_term(std::string_view term) {
  return text::case_fold(text::collapse_whitespace(term));
}

bool UserProfile::has_background() const {
  return !text::collapse_whitespace(background_text).empty();
}

std::optional<Verdict> UserProfile::verdict_for(const std::string& key) const {
  auto has = [&key](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), key) != v.end();
  };
  if (has(liked_terms)) return Verdict::Like;
  if (has(disliked_terms)) return Verdict::Dislike;
  return std::nullopt;
}

void UserProfile::set_verdict(const std::string& key, Verdict verdict) {
  auto& into = verdict == Verdict::Like ? liked_terms : disliked_terms;
  auto& other = verdict == Verdict::Like ? disliked_terms : liked_terms;
  other.erase(std::remove(other.begin(), other.end(), key), other.end());
  if (std::find(into.begin(), into.end(), key) == into.end()) {
    into.push_back(key);
  }
}

std::string UserProfile::preference_summary() const {
  return render_preferences(liked_terms, disliked_terms);
}

Mode SessionState::mode() const {
  return profile.has_background() ? Mode::Personalized : Mode::General;
}

const TermEntry* SessionState::find(const std::string& key) const {
  for (const auto& entry : glossary) {
    if (entry.key == key) return &entry;
  }
  return nullptr;
}

std::pair<SessionState, PipelineDelta> process_segment(
    const SessionState& state, const TranscriptSegment& segment,
    const Gateway& gateway, int64_t now_ms) {
  if (segment.seq != state.next_seq_expected) {
    throw Error(ErrorCode::SequenceGap,
                "expected seq " + std::to_string(state.next_seq_expected) +
                    ", got " + std::to_string(segment.seq));
  }

  SessionState next = state;
  next.next_seq_expected = segment.seq + 1;
  PipelineDelta delta;

  std::vector<std::string> defined_terms;
  defined_terms.reserve(state.glossary.size());
  for (const auto& entry : state.glossary) defined_terms.push_back(entry.term);

  TermList kept;
  try {
    TermList raw = gateway.identify(segment.text, defined_terms,
                                    state.profile.preference_summary());
    std::set<std::string> seen;
    for (auto& item : raw) {
      std::string key = normalize_term(item.term);
      if (key.empty() || text::collapse_whitespace(item.definition).empty()) {
        continue;
      }
      if (state.defined_keys.count(key) || !seen.insert(key).second) continue;
      delta.candidates.push_back(std::move(item));
    }

    kept = delta.candidates;
    if (state.mode() == Mode::Personalized && !kept.empty()) {
      FilterResult filtered =
          gateway.filter(state.profile.background_text, kept);
      // Keep identification order; the filter only decides membership.
      std::set<std::string> refined;
      for (const auto& item : filtered.refined_glossary) {
        refined.insert(normalize_term(item.term));
      }
      std::erase_if(kept, [&refined](const TermDefinition& item) {
        return !refined.count(normalize_term(item.term));
      });
      delta.understood_dropped = std::move(filtered.understood_terms);
    }
  } catch (const ProviderError& e) {
    PipelineDelta skipped;
    skipped.diagnostics.push_back({"provider_error", e.what(), segment.seq});
    return {std::move(next), std::move(skipped)};
  } catch (const Error& e) {
    PipelineDelta skipped;
    skipped.diagnostics.push_back({"malformed_output", e.what(), segment.seq});
    return {std::move(next), std::move(skipped)};
  }

  int64_t identified_at = now_ms;
  if (!next.glossary.empty()) {
    identified_at = std::max(identified_at, next.glossary.back().identified_at_ms);
  }
  for (auto& item : kept) {
    TermEntry entry{item.term, normalize_term(item.term), item.definition,
                    segment.seq, identified_at};
    next.defined_keys.insert(entry.key);
    next.glossary.push_back(entry);
    delta.new_entries.push_back(std::move(entry));
  }
  delta.highlights = highlight_terms(segment.text, next.defined_keys, segment.seq);
  return {std::move(next), std::move(delta)};
}

SessionState apply_feedback(const SessionState& state,
                            const FeedbackEvent& event) {
  const std::string key = normalize_term(event.key);
  if (!state.defined_keys.count(key)) {
    throw Error(ErrorCode::UnknownTerm, "'" + event.key + "' was never defined");
  }
  SessionState next = state;
  next.profile.set_verdict(key, event.verdict);
  next.feedback_log.push_back({key, event.verdict, event.at_ms});
  return next;
}

std::vector<HighlightSpan> highlight_terms(std::string_view segment_text,
                                           const std::set<std::string>& keys,
                                           int64_t seq) {
  const std::u32string original =
      text::decode_utf8(text::collapse_whitespace(segment_text));
  const std::u32string folded = text::case_fold(original);

  std::vector<std::pair<std::u32string, std::string>> needles;
  for (const auto& key : keys) {
    std::string normalized = normalize_term(key);
    if (normalized.empty()) continue;
    needles.emplace_back(text::decode_utf8(normalized), key);
  }
  std::stable_sort(needles.begin(), needles.end(),
                   [](const auto& a, const auto& b) {
                     return a.first.size() > b.first.size();
                   });

  std::vector<bool> claimed(folded.size(), false);
  std::vector<HighlightSpan> spans;
  for (const auto& [needle, key] : needles) {
    std::size_t from = 0;
    while (from < folded.size()) {
      const std::size_t start = folded.find(needle, from);
      if (start == std::u32string::npos) break;
      const std::size_t end = start + needle.size();
      const bool left_ok = start == 0 || !text::is_word_char(needle.front()) ||
                           !text::is_word_char(folded[start - 1]);
      const bool right_ok = end == folded.size() ||
                            !text::is_word_char(needle.back()) ||
                            !text::is_word_char(folded[end]);
      const bool free = std::none_of(claimed.begin() + start,
                                     claimed.begin() + end,
                                     [](bool c) { return c; });
      if (left_ok && right_ok && free) {
        std::fill(claimed.begin() + start, claimed.begin() + end, true);
        spans.push_back({seq, start, end, key});
        from = end;
      } else {
        from = start + 1;
      }
    }
  }
  std::sort(spans.begin(), spans.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  return spans;
}

nlohmann::ordered_json export_glossary(const SessionState& state) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& entry : state.glossary) {
    nlohmann::ordered_json record;
    record["term"] = entry.term;
    record["definition"] = entry.definition;
    record["origin_seq"] = entry.origin_seq;
    record["identified_at_ms"] = entry.identified_at_ms;
    if (auto verdict = state.profile.verdict_for(entry.key)) {
      record["verdict"] = to_string(*verdict);
    } else {
      record["verdict"] = nullptr;
    }
    out.push_back(std::move(record));
  }
  return out;
}

}  // namespace parsejargon
