#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rolekit/llm/types.hpp"

namespace rolekit::prompts {

struct PromptTemplate {
    std::string system;
    std::string user;
};

using PromptVars = std::map<std::string, std::string>;

/// Substitutes `{identifier}` placeholders. `{{` and `}}` escape literal
/// braces; a brace not followed by an identifier and `}` is literal text.
/// Throws ConfigError naming any placeholder missing from `vars`.
std::string render_template(std::string_view text, const PromptVars& vars);

/// Template files hold an "@@system" section and/or an "@@user" section,
/// each introduced by the marker on its own line.
PromptTemplate parse_template_file(std::string_view content);

/// Prompt templates keyed by (language tag, template name). Built-in
/// defaults ship for "en" and "zh"; a directory laid out as
/// <dir>/<lang>/<name>.txt overrides or extends them.
class PromptLibrary {
public:
    static PromptLibrary builtin();

    void load_directory(const std::filesystem::path& dir);
    void set(const std::string& language, const std::string& name, PromptTemplate tmpl);

    /// Falls back to "en" when the language has no such template.
    const PromptTemplate& get(const std::string& name, const std::string& language) const;

    /// Chat request whose system prompt and single user message are the
    /// rendered template sections; `task` is the template name.
    llm::ChatRequest request(const std::string& name, const std::string& language, const PromptVars& vars) const;

    std::string render_system(const std::string& name, const std::string& language, const PromptVars& vars) const;

    /// Follow-up to a failed structured reply: the original conversation, the
    /// bad reply as an assistant turn, then the rendered json_repair prompt.
    llm::ChatRequest repair_request(const llm::ChatRequest& original, const std::string& bad_reply,
                                    const std::string& reason, const std::string& language) const;

    std::vector<std::string> languages() const;
    std::vector<std::string> names(const std::string& language) const;

private:
    std::map<std::string, std::map<std::string, PromptTemplate>> templates_;
};

} // namespace rolekit::prompts
