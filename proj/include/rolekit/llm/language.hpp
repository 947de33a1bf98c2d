#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rolekit::llm {

struct LanguageRule {
    std::string tag;
    bool (*counts)(char32_t);
};

/// zh counts CJK letters (CJK punctuation excluded), en counts Latin letters.
const std::vector<LanguageRule>& default_language_rules();

inline constexpr std::string_view kDefaultLanguage = "en";

/// Character-class majority vote; ties and inputs with no counted
/// characters return `fallback`.
std::string select_prompt_language(std::string_view input,
                                   const std::vector<LanguageRule>& rules = default_language_rules(),
                                   std::string_view fallback = kDefaultLanguage);

} // namespace rolekit::llm
