#pragma once

#include <string_view>

#include <nlohmann/json.hpp>

namespace rolekit::llm {

/// Pulls the first JSON array or object out of a model reply, tolerating
/// code fences and surrounding prose. Throws ParseError carrying the raw
/// reply when no valid JSON value is found.
nlohmann::json parse_json_reply(std::string_view raw);

} // namespace rolekit::llm
