#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace rolekit::text {

struct Codepoint {
    char32_t value;
    std::size_t length; // bytes consumed
};

/// Decodes one codepoint at `pos`. Malformed sequences decode as U+FFFD and
/// consume a single byte, so iteration always makes progress.
Codepoint decode_at(std::string_view s, std::size_t pos) noexcept;

void append_utf8(std::string& out, char32_t cp);

bool is_whitespace(char32_t cp) noexcept;

/// CJK ideographs, kana, hangul, CJK symbols and full-width forms.
bool is_cjk(char32_t cp) noexcept;

bool is_punctuation(char32_t cp) noexcept;

bool is_latin_letter(char32_t cp) noexcept;

std::string_view trim(std::string_view s) noexcept;

/// Leading and trailing whitespace lengths in bytes (Unicode-aware).
std::size_t leading_space_bytes(std::string_view s) noexcept;
std::size_t trailing_space_bytes(std::string_view s) noexcept;

} // namespace rolekit::text
