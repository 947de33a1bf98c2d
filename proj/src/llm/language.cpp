#include "rolekit/llm/language.hpp"

#include "rolekit/text/utf8.hpp"

namespace rolekit::llm {

namespace {

bool counts_cjk(char32_t cp) { return text::is_cjk(cp) && !text::is_punctuation(cp); }
bool counts_latin(char32_t cp) { return text::is_latin_letter(cp); }

} // namespace

const std::vector<LanguageRule>& default_language_rules() {
    static const std::vector<LanguageRule> rules = {
        {"zh", &counts_cjk},
        {"en", &counts_latin},
    };
    return rules;
}

std::string select_prompt_language(std::string_view input, const std::vector<LanguageRule>& rules,
                                   std::string_view fallback) {
    std::vector<std::size_t> counts(rules.size(), 0);
    std::size_t pos = 0;
    while (pos < input.size()) {
        const auto cp = text::decode_at(input, pos);
        pos += cp.length;
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (rules[i].counts(cp.value)) {
                ++counts[i];
            }
        }
    }
    std::size_t best = 0;
    bool tie = true;
    std::string_view tag = fallback;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        if (counts[i] > best) {
            best = counts[i];
            tag = rules[i].tag;
            tie = false;
        } else if (counts[i] == best && best > 0) {
            tie = true;
        }
    }
    if (best == 0 || tie) {
        return std::string(fallback);
    }
    return std::string(tag);
}

} // namespace rolekit::llm
