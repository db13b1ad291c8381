#pragma once

#include <string>
#include <string_view>

namespace parsejargon::text {

// UTF-8 helpers shared by segmentation, dedup and highlighting. Offsets
// exposed elsewhere in the library count Unicode code points.

std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

bool is_space(char32_t c);
bool is_word_char(char32_t c);

/// Collapses every whitespace run to one ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view s);

/// Simple (1:1) Unicode case folding, so code point counts are preserved.
std::u32string case_fold(std::u32string_view s);
std::string case_fold(std::string_view s);

std::size_t code_point_count(std::string_view s);

}  // namespace parsejargon::text
