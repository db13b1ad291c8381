#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "parsejargon/prompts.hpp"

namespace parsejargon {

struct FilterResult {
  std::vector<std::string> understood_terms;
  TermList refined_glossary;
};

/// Removes Markdown code fences (``` with an optional language tag).
std::string strip_code_fences(std::string_view raw);

/// Every bracket-balanced substring starting with `open`, in order of start
/// position. Brackets inside JSON strings do not count.
std::vector<std::string_view> balanced_candidates(std::string_view text,
                                                  char open, char close);

/// Salvages the first JSON array of one-key {"term": "definition"} objects
/// from model output. Throws MalformedTermList.
TermList parse_term_list(std::string_view raw);

/// Salvages the filter object and repairs it into a partition of `input`:
/// unknown terms are dropped, input terms missing from both lists go to the
/// refined glossary, a term in both lists stays refined, and definitions
/// always come from `input`. Terms are matched under normalize_term.
/// Throws MalformedFilterResult.
FilterResult parse_filter_result(std::string_view raw, const TermList& input);

}  // namespace parsejargon
