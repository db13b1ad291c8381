#include "parsejargon/prompts.hpp"

#include <nlohmann/json.hpp>

#include "parsejargon/error.hpp"

namespace parsejargon {

namespace {

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

std::string json_string(const std::string& s) {
  return nlohmann::json(s).dump(-1, ' ', false,
                                nlohmann::json::error_handler_t::replace);
}

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

const PromptTemplate& identify_template() {
  static const PromptTemplate tmpl{
      "Your job is to help an audience listen to speeches that might contain "
      "terms they are unfamiliar with. You will be given the transcript of the "
      "speech, one sentence after another. For each sentence, the format will "
      "be \"Transcript: [sentence]\". Your task is to first identify any of "
      "those terms that the audience might not fully understand, then provide "
      "a definition for each term with any necessary background knowledge in "
      "concise, simple plain language. Please skip any terms you believe are "
      "nonsense or partial-error caused by speech-to-text transcription "
      "mistakes. Your output should be in the format of a list of "
      "term-definition pairs. Return only valid JSON in the format "
      "[{\"term\": \"definition\"}, ...]. Do not include additional commentary "
      "or text outside the JSON. Please leave the list blank if you think all "
      "the terms in the input phrase are common words that don't need "
      "additional explanations. You don't need to output a term if it has "
      "already been identified in previous input phrases.",
      "Transcript: {transcript}, Previously define terms: {defined_terms}, "
      "User preference: {preferences}"};
  return tmpl;
}

const PromptTemplate& filter_template() {
  static const PromptTemplate tmpl{
      "A previous agent has generated a glossary of term-definition pairs from "
      "a transcript. Your job is to help the audience reduce the number of "
      "terms in the glossary. The audience's background is \"{background}\". "
      "The input glossary is provided in valid JSON format, where each item is "
      "structured as {\"term\": \"definition\"}. Please examine only the terms "
      "(the keys in the JSON) and determine which terms the audience is likely "
      "already familiar with based on their background. Then, remove these "
      "terms from the glossary. Return only valid JSON structured exactly as: "
      "{\"understood_terms\": [\"term1\", \"term2\", ...], "
      "\"refined_glossary\": [{\"term\": \"definition\"}, ...]}. Do not "
      "include any extra commentary or text.",
      "{glossary}"};
  return tmpl;
}

std::string render_template(
    std::string_view tmpl, const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_placeholder_char(tmpl[j])) ++j;
      if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
        std::string name(tmpl.substr(i + 1, j - i - 1));
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw Error(ErrorCode::MissingBinding, "{" + name + "}");
        }
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string to_prompt_json(const std::vector<std::string>& strings) {
  std::string out = "[";
  for (std::size_t i = 0; i < strings.size(); ++i) {
    if (i) out += ", ";
    out += json_string(strings[i]);
  }
  return out + "]";
}

std::string to_prompt_json(const TermList& glossary) {
  std::string out = "[";
  for (std::size_t i = 0; i < glossary.size(); ++i) {
    if (i) out += ", ";
    out += "{" + json_string(glossary[i].term) + ": " +
           json_string(glossary[i].definition) + "}";
  }
  return out + "]";
}

std::string render_preferences(const std::vector<std::string>& liked,
                               const std::vector<std::string>& disliked) {
  if (liked.empty() && disliked.empty()) return "none";
  auto join = [](const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) out += ", ";
      out += items[i];
    }
    return out + "]";
  };
  return "liked: " + join(liked) + "; disliked: " + join(disliked);
}

Messages render_identify_prompt(std::string_view transcript,
                                const std::vector<std::string>& defined_terms,
                                std::string_view preferences) {
  if (blank(transcript)) throw Error(ErrorCode::EmptyTranscript, "");
  const auto& tmpl = identify_template();
  std::string prefs(preferences);
  if (blank(prefs)) prefs = "none";
  return {tmpl.system_message,
          render_template(tmpl.user_template,
                          {{"transcript", std::string(transcript)},
                           {"defined_terms", to_prompt_json(defined_terms)},
                           {"preferences", prefs}})};
}

Messages render_filter_prompt(std::string_view background,
                              const TermList& glossary) {
  if (glossary.empty()) throw Error(ErrorCode::EmptyGlossary, "");
  if (blank(background)) throw Error(ErrorCode::EmptyBackground, "");
  const auto& tmpl = filter_template();
  return {render_template(tmpl.system_message,
                          {{"background", std::string(background)}}),
          render_template(tmpl.user_template,
                          {{"glossary", to_prompt_json(glossary)}})};
}

}  // namespace parsejargon
