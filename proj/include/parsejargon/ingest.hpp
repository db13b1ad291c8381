#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace parsejargon {

struct CaptionChunk {
  std::string session_id;
  std::string text;  // may be a fragment, or empty for a heartbeat
  int64_t t_ms = 0;  // since session start
};

struct TranscriptSegment {
  std::string session_id;
  int64_t seq = 0;
  std::string text;
  int64_t t_start_ms = 0;
  int64_t t_end_ms = 0;

  bool operator==(const TranscriptSegment&) const = default;
};

struct ReplayRecord {
  int64_t t_ms = 0;
  std::string text;
};

inline constexpr int64_t kDefaultSilenceFlushMs = 5000;

// Sentence segmentation for one session's caption stream.
//
// A sentence ends after '.', '!' or '?' when followed by whitespace or by the
// end of the chunk. Abbreviations are not special-cased. Emitted text has
// whitespace runs collapsed and ends trimmed. Chunks are concatenated raw, so
// a chunk that continues a word must not start with a space.
class SegmentationBuffer {
 public:
  explicit SegmentationBuffer(std::string session_id,
                              int64_t silence_flush_ms = kDefaultSilenceFlushMs);

  /// Appends a chunk and returns every sentence it completes. Throws
  /// OutOfOrderChunk or SessionMismatch without modifying the buffer.
  std::vector<TranscriptSegment> ingest(const CaptionChunk& chunk);

  /// Emits the pending fragment once `now_ms` is at least silence_flush_ms
  /// past the last chunk that carried text.
  std::optional<TranscriptSegment> flush(int64_t now_ms);

  /// Emits the pending fragment unconditionally (session end).
  std::optional<TranscriptSegment> force_flush();

  const std::string& session_id() const { return session_id_; }
  /// The pending fragment, whitespace-normalized.
  std::string fragment() const;
  int64_t next_seq() const { return next_seq_; }
  std::optional<int64_t> last_seen_t_ms() const { return last_seen_t_ms_; }
  int64_t silence_flush_ms() const { return silence_flush_ms_; }

  // Raw state accessors for snapshot persistence.
  struct Snapshot {
    std::string session_id;
    std::string pending;
    std::optional<int64_t> pending_start_ms;
    std::optional<int64_t> last_seen_t_ms;
    std::optional<int64_t> last_text_t_ms;
    int64_t next_seq = 0;
    int64_t silence_flush_ms = kDefaultSilenceFlushMs;
  };
  Snapshot snapshot() const;
  static SegmentationBuffer restore(const Snapshot& snapshot);

 private:
  TranscriptSegment make_segment(std::string text, int64_t t_start,
                                 int64_t t_end);

  std::string session_id_;
  int64_t silence_flush_ms_;
  std::u32string pending_;  // raw, not yet normalized
  std::optional<int64_t> pending_start_ms_;
  std::optional<int64_t> last_seen_t_ms_;
  std::optional<int64_t> last_text_t_ms_;
  int64_t next_seq_ = 0;
};

/// Parses replay lines of the form {"t_ms": <int>, "text": <string>}. Blank
/// lines are skipped. Throws ParseError, NonMonotonicTimestamp or EmptyFile,
/// with 1-based line numbers.
std::vector<ReplayRecord> parse_replay(std::istream& in);

/// Loads a replay file as the chunk stream of `session_id`.
std::vector<CaptionChunk> load_replay(const std::filesystem::path& path,
                                      const std::string& session_id);

}  // namespace parsejargon
