#include "rolekit/prompts/prompt_library.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "rolekit/error.hpp"
#include "rolekit/llm/language.hpp"

namespace rolekit::prompts {

namespace detail {

struct BuiltinPrompt {
    const char* language;
    const char* name;
    const char* content;
};

// Generated at configure time from prompts/<lang>/<name>.txt.
extern const BuiltinPrompt kBuiltinPrompts[];
extern const std::size_t kBuiltinPromptCount;

} // namespace detail

namespace {

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read prompt template " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::string render_template(std::string_view text, const PromptVars& vars) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            out.push_back('{');
            i += 2;
            continue;
        }
        if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            out.push_back('}');
            i += 2;
            continue;
        }
        if (c == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_ident_char(text[j])) {
                ++j;
            }
            if (j > i + 1 && j < text.size() && text[j] == '}') {
                const std::string key(text.substr(i + 1, j - i - 1));
                const auto it = vars.find(key);
                if (it == vars.end()) {
                    throw ConfigError("prompt placeholder {" + key + "} has no value");
                }
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

PromptTemplate parse_template_file(std::string_view content) {
    PromptTemplate tmpl;
    std::string* section = nullptr;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        auto eol = content.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = content.size();
        }
        auto line = content.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line == "@@system") {
            section = &tmpl.system;
        } else if (line == "@@user") {
            section = &tmpl.user;
        } else if (section != nullptr) {
            *section += line;
            *section += '\n';
        } else if (!line.empty()) {
            throw ConfigError("prompt template text before the first @@system/@@user marker");
        }
        if (eol == content.size()) {
            break;
        }
        pos = eol + 1;
    }
    // strip the single trailing newline each section picked up from the file
    for (auto* s : {&tmpl.system, &tmpl.user}) {
        while (!s->empty() && s->back() == '\n') {
            s->pop_back();
        }
    }
    return tmpl;
}

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;
    for (std::size_t i = 0; i < detail::kBuiltinPromptCount; ++i) {
        const auto& p = detail::kBuiltinPrompts[i];
        lib.set(p.language, p.name, parse_template_file(p.content));
    }
    return lib;
}

void PromptLibrary::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("prompt directory " + dir.string() + " does not exist");
    }
    for (const auto& lang_dir : std::filesystem::directory_iterator(dir)) {
        if (!lang_dir.is_directory()) {
            continue;
        }
        const auto language = lang_dir.path().filename().string();
        for (const auto& file : std::filesystem::directory_iterator(lang_dir.path())) {
            if (file.path().extension() == ".txt") {
                set(language, file.path().stem().string(), parse_template_file(read_file(file.path())));
            }
        }
    }
}

void PromptLibrary::set(const std::string& language, const std::string& name, PromptTemplate tmpl) {
    templates_[language][name] = std::move(tmpl);
}

const PromptTemplate& PromptLibrary::get(const std::string& name, const std::string& language) const {
    for (const auto& lang : {language, std::string(llm::kDefaultLanguage)}) {
        if (const auto l = templates_.find(lang); l != templates_.end()) {
            if (const auto t = l->second.find(name); t != l->second.end()) {
                return t->second;
            }
        }
    }
    throw ConfigError("no prompt template '" + name + "' for language '" + language + "'");
}

llm::ChatRequest PromptLibrary::request(const std::string& name, const std::string& language,
                                        const PromptVars& vars) const {
    const auto& tmpl = get(name, language);
    llm::ChatRequest req;
    req.task = name;
    req.system_prompt = render_template(tmpl.system, vars);
    req.messages.push_back({llm::Role::user, render_template(tmpl.user, vars)});
    return req;
}

std::string PromptLibrary::render_system(const std::string& name, const std::string& language,
                                         const PromptVars& vars) const {
    return render_template(get(name, language).system, vars);
}

llm::ChatRequest PromptLibrary::repair_request(const llm::ChatRequest& original, const std::string& bad_reply,
                                               const std::string& reason, const std::string& language) const {
    llm::ChatRequest req = original;
    req.task = original.task + ".repair";
    req.messages.push_back({llm::Role::assistant, bad_reply});
    req.messages.push_back({llm::Role::user, render_template(get("json_repair", language).user, {{"error", reason}})});
    return req;
}

std::vector<std::string> PromptLibrary::languages() const {
    std::vector<std::string> out;
    for (const auto& [lang, _] : templates_) {
        out.push_back(lang);
    }
    return out;
}

std::vector<std::string> PromptLibrary::names(const std::string& language) const {
    std::vector<std::string> out;
    if (const auto l = templates_.find(language); l != templates_.end()) {
        for (const auto& [name, _] : l->second) {
            out.push_back(name);
        }
    }
    return out;
}

} // namespace rolekit::prompts
