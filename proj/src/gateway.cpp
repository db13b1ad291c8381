#include "parsejargon/gateway.hpp"

namespace parsejargon {

Gateway::Gateway(std::shared_ptr<CompletionProvider> provider,
                 CompletionParams params, RetryPolicy retry, Sleeper sleep)
    : provider_(std::move(provider)),
      params_(std::move(params)),
      retry_(retry),
      sleep_(std::move(sleep)) {
  params_.validate();
}

TermList Gateway::identify(std::string_view transcript,
                           const std::vector<std::string>& defined_terms,
                           std::string_view preferences) const {
  auto messages = render_identify_prompt(transcript, defined_terms, preferences);
  ++identify_calls_;
  return parse_term_list(
      complete(*provider_, messages, params_, retry_, sleep_));
}

FilterResult Gateway::filter(std::string_view background,
                             const TermList& glossary) const {
  auto messages = render_filter_prompt(background, glossary);
  ++filter_calls_;
  return parse_filter_result(
      complete(*provider_, messages, params_, retry_, sleep_), glossary);
}

}  // namespace parsejargon
