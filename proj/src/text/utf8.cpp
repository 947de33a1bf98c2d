#include "rolekit/text/utf8.hpp"

namespace rolekit::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_continuation(unsigned char c) noexcept { return (c & 0xC0) == 0x80; }

} // namespace

Codepoint decode_at(std::string_view s, std::size_t pos) noexcept {
    const auto lead = static_cast<unsigned char>(s[pos]);
    if (lead < 0x80) {
        return {lead, 1};
    }
    std::size_t len = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        len = 2;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        len = 3;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        len = 4;
        cp = lead & 0x07;
    } else {
        return {kReplacement, 1};
    }
    if (pos + len > s.size()) {
        return {kReplacement, 1};
    }
    for (std::size_t i = 1; i < len; ++i) {
        const auto c = static_cast<unsigned char>(s[pos + i]);
        if (!is_continuation(c)) {
            return {kReplacement, 1};
        }
        cp = (cp << 6) | (c & 0x3F);
    }
    // overlong encodings and surrogates
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
        return {kReplacement, 1};
    }
    return {cp, len};
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_whitespace(char32_t cp) noexcept {
    switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x00A0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000: case 0xFEFF:
        return true;
    default:
        return cp >= 0x2000 && cp <= 0x200B;
    }
}

bool is_cjk(char32_t cp) noexcept {
    if (is_whitespace(cp)) {
        return false;
    }
    return (cp >= 0x2E80 && cp <= 0x2FDF) ||   // radicals
           (cp >= 0x3000 && cp <= 0x303F) ||   // symbols and punctuation
           (cp >= 0x3040 && cp <= 0x30FF) ||   // kana
           (cp >= 0x3100 && cp <= 0x312F) ||   // bopomofo
           (cp >= 0x3190 && cp <= 0x31FF) ||
           (cp >= 0x3400 && cp <= 0x4DBF) ||   // extension A
           (cp >= 0x4E00 && cp <= 0x9FFF) ||   // unified ideographs
           (cp >= 0xAC00 && cp <= 0xD7AF) ||   // hangul
           (cp >= 0xF900 && cp <= 0xFAFF) ||   // compatibility ideographs
           (cp >= 0xFF00 && cp <= 0xFFEF) ||   // half/full-width forms
           (cp >= 0x20000 && cp <= 0x2FA1F);
}

bool is_punctuation(char32_t cp) noexcept {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
               (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
    }
    return (cp >= 0x00A1 && cp <= 0x00BF && cp != 0x00AA && cp != 0x00B5 && cp != 0x00BA) ||
           (cp >= 0x2010 && cp <= 0x205E) ||
           (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011) ||
           (cp >= 0x3014 && cp <= 0x301F) || cp == 0x30FB ||
           (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
           (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) ||
           cp == kReplacement;
}

bool is_latin_letter(char32_t cp) noexcept {
    return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') ||
           (cp >= 0x00C0 && cp <= 0x024F && cp != 0x00D7 && cp != 0x00F7);
}

std::size_t leading_space_bytes(std::string_view s) noexcept {
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto cp = decode_at(s, pos);
        if (!is_whitespace(cp.value)) {
            break;
        }
        pos += cp.length;
    }
    return pos;
}

std::size_t trailing_space_bytes(std::string_view s) noexcept {
    // Walk forward, remembering where the last non-space codepoint ended.
    std::size_t pos = 0;
    std::size_t content_end = 0;
    while (pos < s.size()) {
        const auto cp = decode_at(s, pos);
        pos += cp.length;
        if (!is_whitespace(cp.value)) {
            content_end = pos;
        }
    }
    return s.size() - content_end;
}

std::string_view trim(std::string_view s) noexcept {
    const auto lead = leading_space_bytes(s);
    if (lead == s.size()) {
        return s.substr(s.size());
    }
    const auto trail = trailing_space_bytes(s);
    return s.substr(lead, s.size() - lead - trail);
}

} // namespace rolekit::text
