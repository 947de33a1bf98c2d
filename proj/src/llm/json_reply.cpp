#include "rolekit/llm/json_reply.hpp"

#include <string>

#include "rolekit/error.hpp"

namespace rolekit::llm {

namespace {

// Index one past the bracket that closes the one at `open`, honouring
// string literals. npos when unbalanced.
std::size_t matching_close(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '[' || c == '{') {
            ++depth;
        } else if (c == ']' || c == '}') {
            if (--depth == 0) {
                return i + 1;
            }
        }
    }
    return std::string_view::npos;
}

} // namespace

nlohmann::json parse_json_reply(std::string_view raw) {
    for (std::size_t start = raw.find_first_of("[{"); start != std::string_view::npos;
         start = raw.find_first_of("[{", start + 1)) {
        const auto end = matching_close(raw, start);
        if (end == std::string_view::npos) {
            continue;
        }
        auto parsed = nlohmann::json::parse(raw.substr(start, end - start), nullptr, false);
        if (!parsed.is_discarded()) {
            return parsed;
        }
    }
    throw ParseError("reply contains no valid JSON value", std::string(raw));
}

} // namespace rolekit::llm
