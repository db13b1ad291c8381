#include "parsejargon/scheduler.hpp"

#include <algorithm>

#include "parsejargon/error.hpp"

namespace parsejargon {

DisplayState::DisplayState(int64_t min_display_ms)
    : min_display_ms_(min_display_ms) {
  if (min_display_ms_ <= 0) {
    throw Error(ErrorCode::InvalidArgument, "min_display_ms must be positive");
  }
}

std::optional<DisplayChange> DisplayState::push(const std::string& key,
                                                int64_t now_ms) {
  if (current_ == key ||
      std::find(queue_.begin(), queue_.end(), key) != queue_.end()) {
    throw Error(ErrorCode::DuplicateKey, key);
  }
  if (!current_ || (queue_.empty() && held_long_enough(now_ms))) {
    return show(key, now_ms);
  }
  queue_.push_back(key);
  return std::nullopt;
}

std::optional<DisplayChange> DisplayState::tick(int64_t now_ms) {
  if (!current_ || queue_.empty() || !held_long_enough(now_ms)) {
    return std::nullopt;
  }
  std::string next = std::move(queue_.front());
  queue_.pop_front();
  return show(std::move(next), now_ms);
}

bool DisplayState::held_long_enough(int64_t now_ms) const {
  return now_ms - shown_since_ms_ >= min_display_ms_;
}

DisplayChange DisplayState::show(std::string key, int64_t now_ms) {
  current_ = std::move(key);
  shown_since_ms_ = now_ms;
  return {*current_, now_ms, queue_.size()};
}

DisplayState DisplayState::restore(std::optional<std::string> current,
                                   int64_t shown_since_ms,
                                   std::deque<std::string> queue,
                                   int64_t min_display_ms) {
  DisplayState state(min_display_ms);
  state.current_ = std::move(current);
  state.shown_since_ms_ = shown_since_ms;
  state.queue_ = std::move(queue);
  return state;
}

}  // namespace parsejargon
