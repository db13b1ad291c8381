#include "parsejargon/ingest.hpp"

#include <fstream>
#include <istream>

#include <nlohmann/json.hpp>

#include "parsejargon/error.hpp"
#include "parsejargon/text.hpp"

namespace parsejargon {

namespace {

bool is_terminal(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

bool has_content(std::u32string_view s) {
  for (char32_t c : s) {
    if (!text::is_space(c)) return true;
  }
  return false;
}

}  // namespace

SegmentationBuffer::SegmentationBuffer(std::string session_id,
                                       int64_t silence_flush_ms)
    : session_id_(std::move(session_id)), silence_flush_ms_(silence_flush_ms) {
  if (silence_flush_ms_ < 0) {
    throw Error(ErrorCode::InvalidArgument, "silence_flush_ms must be >= 0");
  }
}

std::vector<TranscriptSegment> SegmentationBuffer::ingest(
    const CaptionChunk& chunk) {
  if (chunk.session_id != session_id_) {
    throw Error(ErrorCode::SessionMismatch,
                "chunk for '" + chunk.session_id + "' sent to buffer of '" +
                    session_id_ + "'");
  }
  if (chunk.t_ms < 0) {
    throw Error(ErrorCode::OutOfOrderChunk, "negative t_ms");
  }
  if (last_seen_t_ms_ && chunk.t_ms < *last_seen_t_ms_) {
    throw Error(ErrorCode::OutOfOrderChunk,
                "t_ms " + std::to_string(chunk.t_ms) + " < " +
                    std::to_string(*last_seen_t_ms_));
  }
  last_seen_t_ms_ = chunk.t_ms;

  std::u32string incoming = text::decode_utf8(chunk.text);
  if (incoming.empty()) return {};
  if (has_content(incoming)) {
    last_text_t_ms_ = chunk.t_ms;
    if (!pending_start_ms_) pending_start_ms_ = chunk.t_ms;
  }
  pending_ += incoming;

  std::vector<TranscriptSegment> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    if (!is_terminal(pending_[i])) continue;
    if (i + 1 < pending_.size() && !text::is_space(pending_[i + 1])) continue;
    std::u32string_view sentence(pending_.data() + begin, i + 1 - begin);
    if (has_content(sentence)) {
      out.push_back(make_segment(
          text::collapse_whitespace(text::encode_utf8(sentence)),
          pending_start_ms_.value_or(chunk.t_ms), chunk.t_ms));
      // Any remainder after a split arrived with this chunk.
      pending_start_ms_ = chunk.t_ms;
    }
    begin = i + 1;
  }
  pending_.erase(0, begin);
  if (!has_content(pending_)) pending_start_ms_.reset();
  return out;
}

std::optional<TranscriptSegment> SegmentationBuffer::flush(int64_t now_ms) {
  if (!has_content(pending_) || !last_text_t_ms_) return std::nullopt;
  if (now_ms - *last_text_t_ms_ < silence_flush_ms_) return std::nullopt;
  return force_flush();
}

std::optional<TranscriptSegment> SegmentationBuffer::force_flush() {
  if (!has_content(pending_)) return std::nullopt;
  auto segment =
      make_segment(fragment(), pending_start_ms_.value_or(0),
                   last_text_t_ms_.value_or(pending_start_ms_.value_or(0)));
  pending_.clear();
  pending_start_ms_.reset();
  return segment;
}

std::string SegmentationBuffer::fragment() const {
  return text::collapse_whitespace(text::encode_utf8(pending_));
}

TranscriptSegment SegmentationBuffer::make_segment(std::string text,
                                                   int64_t t_start,
                                                   int64_t t_end) {
  TranscriptSegment segment;
  segment.session_id = session_id_;
  segment.seq = next_seq_++;
  segment.text = std::move(text);
  segment.t_start_ms = t_start;
  segment.t_end_ms = std::max(t_start, t_end);
  return segment;
}

SegmentationBuffer::Snapshot SegmentationBuffer::snapshot() const {
  return Snapshot{session_id_,      text::encode_utf8(pending_),
                  pending_start_ms_, last_seen_t_ms_,
                  last_text_t_ms_,   next_seq_,
                  silence_flush_ms_};
}

SegmentationBuffer SegmentationBuffer::restore(const Snapshot& snapshot) {
  SegmentationBuffer buffer(snapshot.session_id, snapshot.silence_flush_ms);
  buffer.pending_ = text::decode_utf8(snapshot.pending);
  buffer.pending_start_ms_ = snapshot.pending_start_ms;
  buffer.last_seen_t_ms_ = snapshot.last_seen_t_ms;
  buffer.last_text_t_ms_ = snapshot.last_text_t_ms;
  buffer.next_seq_ = snapshot.next_seq;
  return buffer;
}

std::vector<ReplayRecord> parse_replay(std::istream& in) {
  std::vector<ReplayRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::ParseError, "not a JSON object", line_no);
    }
    auto t = j.find("t_ms");
    auto txt = j.find("text");
    if (t == j.end() || !t->is_number_integer()) {
      throw Error(ErrorCode::ParseError, "missing integer t_ms", line_no);
    }
    if (txt == j.end() || !txt->is_string()) {
      throw Error(ErrorCode::ParseError, "missing string text", line_no);
    }
    ReplayRecord record{t->get<int64_t>(), txt->get<std::string>()};
    if (record.t_ms < 0) {
      throw Error(ErrorCode::ParseError, "negative t_ms", line_no);
    }
    if (!records.empty() && record.t_ms < records.back().t_ms) {
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  std::to_string(record.t_ms) + " after " +
                      std::to_string(records.back().t_ms),
                  line_no);
    }
    records.push_back(std::move(record));
  }
  if (records.empty()) throw Error(ErrorCode::EmptyFile, "no replay records");
  return records;
}

std::vector<CaptionChunk> load_replay(const std::filesystem::path& path,
                                      const std::string& session_id) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  std::vector<CaptionChunk> chunks;
  for (auto& record : parse_replay(in)) {
    chunks.push_back({session_id, std::move(record.text), record.t_ms});
  }
  return chunks;
}

}  // namespace parsejargon
