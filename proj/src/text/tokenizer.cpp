#include "rolekit/text/tokenizer.hpp"

#include "rolekit/text/utf8.hpp"

namespace rolekit::text {

namespace {

// Full-width Latin letters and digits behave like their ASCII forms.
bool splits_alone(char32_t cp) {
    const bool fullwidth_alnum = (cp >= 0xFF10 && cp <= 0xFF19) || (cp >= 0xFF21 && cp <= 0xFF3A) ||
                                 (cp >= 0xFF41 && cp <= 0xFF5A);
    return is_cjk(cp) && !fullwidth_alnum;
}

} // namespace

std::vector<Token> DefaultTokenizer::tokenize(std::string_view text) const {
    std::vector<Token> tokens;
    std::size_t pos = 0;
    std::size_t run_begin = std::string_view::npos;
    while (pos < text.size()) {
        const auto cp = decode_at(text, pos);
        if (is_whitespace(cp.value)) {
            if (run_begin != std::string_view::npos) {
                tokens.push_back({run_begin, pos});
                run_begin = std::string_view::npos;
            }
        } else if (splits_alone(cp.value)) {
            if (run_begin != std::string_view::npos) {
                tokens.push_back({run_begin, pos});
                run_begin = std::string_view::npos;
            }
            tokens.push_back({pos, pos + cp.length});
        } else if (run_begin == std::string_view::npos) {
            run_begin = pos;
        }
        pos += cp.length;
    }
    if (run_begin != std::string_view::npos) {
        tokens.push_back({run_begin, text.size()});
    }
    return tokens;
}

const Tokenizer& default_tokenizer() {
    static const DefaultTokenizer instance;
    return instance;
}

namespace {

char32_t fold(char32_t cp) {
    if (cp >= 0xFF01 && cp <= 0xFF5E) {
        cp -= 0xFEE0; // full-width ASCII
    }
    if (cp >= U'A' && cp <= U'Z') {
        cp += 32;
    }
    if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) {
        cp += 32;
    }
    if (cp == 0x2019 || cp == 0x2018) {
        cp = U'\'';
    }
    return cp;
}

void split_word_runs(std::string_view token, std::vector<std::string>& out) {
    std::string current;
    std::size_t pos = 0;
    while (pos < token.size()) {
        const auto cp = decode_at(token, pos);
        pos += cp.length;
        const char32_t c = fold(cp.value);
        if (c == U'\'') {
            // keep only when it sits between two word characters
            if (!current.empty() && pos < token.size() &&
                !is_punctuation(fold(decode_at(token, pos).value))) {
                current.push_back('\'');
            } else if (!current.empty()) {
                out.push_back(std::move(current));
                current.clear();
            }
            continue;
        }
        if (is_punctuation(c)) {
            if (!current.empty()) {
                out.push_back(std::move(current));
                current.clear();
            }
            continue;
        }
        append_utf8(current, c);
    }
    if (!current.empty()) {
        out.push_back(std::move(current));
    }
}

} // namespace

std::vector<std::string> lexical_terms(std::string_view text, const Tokenizer& tokenizer) {
    std::vector<std::string> terms;
    for (const auto& token : tokenizer.tokenize(text)) {
        split_word_runs(text.substr(token.begin, token.end - token.begin), terms);
    }
    return terms;
}

} // namespace rolekit::text
