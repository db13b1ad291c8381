#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace parsejargon {

struct TermDefinition {
  std::string term;
  std::string definition;

  bool operator==(const TermDefinition&) const = default;
};

using TermList = std::vector<TermDefinition>;

struct Messages {
  std::string system;
  std::string user;
};

/// A system/user template pair. Placeholders are `{identifier}` with
/// identifier in [a-z_]; any other brace (e.g. literal JSON) is text.
struct PromptTemplate {
  std::string system_message;
  std::string user_template;
};

const PromptTemplate& identify_template();
const PromptTemplate& filter_template();

/// Substitutes every placeholder. Throws MissingBinding when one is unbound.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& bindings);

/// JSON in the `json.dumps` layout the prompts show: ", " and ": " separators,
/// UTF-8 kept verbatim.
std::string to_prompt_json(const std::vector<std::string>& strings);
std::string to_prompt_json(const TermList& glossary);

/// "liked: [a, b]; disliked: [c]" or "none" when both are empty.
std::string render_preferences(const std::vector<std::string>& liked,
                               const std::vector<std::string>& disliked);

Messages render_identify_prompt(std::string_view transcript,
                                const std::vector<std::string>& defined_terms,
                                std::string_view preferences);

Messages render_filter_prompt(std::string_view background,
                              const TermList& glossary);

}  // namespace parsejargon
