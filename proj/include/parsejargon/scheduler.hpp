#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>

namespace parsejargon {

inline constexpr int64_t kDefaultMinDisplayMs = 7000;
inline constexpr int64_t kDefaultTickMs = 250;

struct DisplayChange {
  std::string key;
  int64_t shown_since_ms = 0;
  std::size_t queue_depth = 0;

  bool operator==(const DisplayChange&) const = default;
};

// The single "latest term" slot. A term holds the slot for at least
// min_display_ms; terms arriving meanwhile wait in FIFO order. The last term
// stays on screen until a successor arrives.
class DisplayState {
 public:
  explicit DisplayState(int64_t min_display_ms = kDefaultMinDisplayMs);

  /// Throws DuplicateKey if `key` is current or queued.
  std::optional<DisplayChange> push(const std::string& key, int64_t now_ms);
  std::optional<DisplayChange> tick(int64_t now_ms);

  const std::optional<std::string>& current() const { return current_; }
  int64_t shown_since_ms() const { return shown_since_ms_; }
  const std::deque<std::string>& queue() const { return queue_; }
  int64_t min_display_ms() const { return min_display_ms_; }

  static DisplayState restore(std::optional<std::string> current,
                              int64_t shown_since_ms,
                              std::deque<std::string> queue,
                              int64_t min_display_ms);

 private:
  bool held_long_enough(int64_t now_ms) const;
  DisplayChange show(std::string key, int64_t now_ms);

  std::optional<std::string> current_;
  int64_t shown_since_ms_ = 0;
  std::deque<std::string> queue_;
  int64_t min_display_ms_;
};

}  // namespace parsejargon
