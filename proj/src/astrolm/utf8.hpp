#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace astrolm::utf8 {

// Decodes UTF-8 into code points; malformed byte sequences become U+FFFD.
std::u32string decode(std::string_view s);

std::string encode(std::u32string_view cps);
std::string encode(char32_t cp);

// Number of code points.
std::size_t length(std::string_view s);

// Unicode whitespace (ASCII space/tab/newlines plus the common non-ASCII
// space code points).
bool is_space(char32_t c);

// Characters split off as single tokens during pre-tokenization. ASCII
// punctuation only; non-ASCII symbols stay attached to their word.
bool is_split_punct(char32_t c);

char32_t ascii_lower(char32_t c);

}  // namespace astrolm::utf8
