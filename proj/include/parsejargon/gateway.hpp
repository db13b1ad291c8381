#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "parsejargon/prompts.hpp"
#include "parsejargon/provider.hpp"
#include "parsejargon/response_parser.hpp"

namespace parsejargon {

/// Renders, completes and parses the two prompts against one provider.
/// Shareable across sessions; call counters are the only mutable state.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<CompletionProvider> provider,
                   CompletionParams params = {}, RetryPolicy retry = {},
                   Sleeper sleep = {});

  TermList identify(std::string_view transcript,
                    const std::vector<std::string>& defined_terms,
                    std::string_view preferences) const;

  FilterResult filter(std::string_view background,
                      const TermList& glossary) const;

  const CompletionParams& params() const { return params_; }
  std::size_t identify_calls() const { return identify_calls_; }
  std::size_t filter_calls() const { return filter_calls_; }

 private:
  std::shared_ptr<CompletionProvider> provider_;
  CompletionParams params_;
  RetryPolicy retry_;
  Sleeper sleep_;
  mutable std::atomic<std::size_t> identify_calls_{0};
  mutable std::atomic<std::size_t> filter_calls_{0};
};

}  // namespace parsejargon
