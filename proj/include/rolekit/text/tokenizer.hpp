#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rolekit::text {

/// Half-open byte range of one token inside the source text.
struct Token {
    std::size_t begin;
    std::size_t end;

    friend bool operator==(const Token&, const Token&) = default;
};

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<Token> tokenize(std::string_view text) const = 0;
};

/// Each CJK codepoint (full-width letters and digits excepted) is one token; every maximal run of non-CJK,
/// non-space codepoints is one token.
class DefaultTokenizer final : public Tokenizer {
public:
    std::vector<Token> tokenize(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

/// Normalized retrieval terms: tokens are case-folded (ASCII and full-width
/// Latin), split into word runs at punctuation, and stripped. Apostrophes
/// inside a word are kept ("you've").
std::vector<std::string> lexical_terms(std::string_view text,
                                       const Tokenizer& tokenizer = default_tokenizer());

} // namespace rolekit::text
