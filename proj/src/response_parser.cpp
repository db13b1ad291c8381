#include "parsejargon/response_parser.hpp"

#include <cctype>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "parsejargon/error.hpp"
#include "parsejargon/pipeline.hpp"

namespace parsejargon {

using nlohmann::json;

std::string strip_code_fences(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw.compare(i, 3, "```") == 0) {
      i += 3;
      while (i < raw.size() &&
             (std::isalnum(static_cast<unsigned char>(raw[i])) ||
              raw[i] == '-' || raw[i] == '_')) {
        ++i;
      }
      continue;
    }
    out += raw[i++];
  }
  return out;
}

std::vector<std::string_view> balanced_candidates(std::string_view text,
                                                  char open, char close) {
  std::vector<std::string_view> out;
  for (std::size_t start = text.find(open); start != std::string_view::npos;
       start = text.find(open, start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == open) {
        ++depth;
      } else if (c == close && --depth == 0) {
        out.push_back(text.substr(start, i - start + 1));
        break;
      }
    }
  }
  return out;
}

namespace {

std::optional<TermList> as_term_list(const json& j) {
  if (!j.is_array()) return std::nullopt;
  TermList out;
  for (const auto& item : j) {
    if (!item.is_object() || item.size() != 1) return std::nullopt;
    auto it = item.begin();
    if (!it.value().is_string()) return std::nullopt;
    out.push_back({it.key(), it.value().get<std::string>()});
  }
  return out;
}

}  // namespace

TermList parse_term_list(std::string_view raw) {
  const std::string cleaned = strip_code_fences(raw);
  bool saw_array = false;
  for (auto candidate : balanced_candidates(cleaned, '[', ']')) {
    auto j = json::parse(candidate, nullptr, false);
    if (j.is_discarded()) continue;
    saw_array = true;
    if (auto list = as_term_list(j)) return *list;
  }
  throw Error(ErrorCode::MalformedTermList,
              saw_array ? "array entries are not one-key string objects"
                        : "no JSON array found");
}

FilterResult parse_filter_result(std::string_view raw, const TermList& input) {
  const std::string cleaned = strip_code_fences(raw);
  std::optional<json> object;
  for (auto candidate : balanced_candidates(cleaned, '{', '}')) {
    auto j = json::parse(candidate, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    if (j.contains("understood_terms") || j.contains("refined_glossary")) {
      object = std::move(j);
      break;
    }
  }
  if (!object) {
    throw Error(ErrorCode::MalformedFilterResult, "no filter object found");
  }

  // Input terms by normalized key, first occurrence wins.
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < input.size(); ++i) {
    index.emplace(normalize_term(input[i].term), i);
  }

  std::vector<std::size_t> refined;
  std::unordered_set<std::size_t> refined_set;
  auto add_refined = [&](const std::string& term) {
    auto it = index.find(normalize_term(term));
    if (it != index.end() && refined_set.insert(it->second).second) {
      refined.push_back(it->second);
    }
  };
  if (auto it = object->find("refined_glossary");
      it != object->end() && it->is_array()) {
    for (const auto& item : *it) {
      if (item.is_object()) {
        for (const auto& [term, _] : item.items()) add_refined(term);
      } else if (item.is_string()) {
        add_refined(item.get<std::string>());
      }
    }
  }

  std::vector<std::size_t> understood;
  std::unordered_set<std::size_t> understood_set;
  if (auto it = object->find("understood_terms");
      it != object->end() && it->is_array()) {
    for (const auto& item : *it) {
      if (!item.is_string()) continue;
      auto found = index.find(normalize_term(item.get<std::string>()));
      if (found == index.end() || refined_set.count(found->second)) continue;
      if (understood_set.insert(found->second).second) {
        understood.push_back(found->second);
      }
    }
  }

  // Fail open: input terms the model left out of both lists stay visible.
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (index.at(normalize_term(input[i].term)) != i) continue;
    if (!refined_set.count(i) && !understood_set.count(i)) {
      refined_set.insert(i);
      refined.push_back(i);
    }
  }

  FilterResult result;
  for (auto i : understood) result.understood_terms.push_back(input[i].term);
  for (auto i : refined) result.refined_glossary.push_back(input[i]);
  return result;
}

}  // namespace parsejargon
