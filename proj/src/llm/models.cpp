#include "rolekit/llm/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/regex.hpp>

#include "rolekit/error.hpp"
#include "rolekit/text/tokenizer.hpp"
#include "rolekit/text/utf8.hpp"

namespace rolekit::llm {

namespace {

bool rule_matches(const ScriptedRule& rule, const std::string& prompt) {
    if (rule.match_kind == MatchKind::substring) {
        return prompt.find(rule.match) != std::string::npos;
    }
    // boost's matcher is non-recursive, so long prompts cannot exhaust the stack
    const boost::regex pattern(rule.match);
    return boost::regex_search(prompt, pattern);
}

} // namespace

ScriptedChatModel::ScriptedChatModel(std::vector<ScriptedRule> rules) {
    rules_.reserve(rules.size());
    for (auto& rule : rules) {
        if (rule.match_kind == MatchKind::regex) {
            try {
                boost::regex check(rule.match);
            } catch (const boost::regex_error& e) {
                throw ConfigError("invalid script regex '" + rule.match + "': " + e.what());
            }
        }
        rules_.push_back({std::move(rule), 0});
    }
}

std::string ScriptedChatModel::complete(const ChatRequest& request) {
    const auto prompt = render_prompt(request);
    std::lock_guard lock(mutex_);
    for (auto& compiled : rules_) {
        if (compiled.rule.call_budget && compiled.used >= *compiled.rule.call_budget) {
            continue;
        }
        if (rule_matches(compiled.rule, prompt)) {
            ++compiled.used;
            return compiled.rule.response;
        }
    }
    constexpr std::size_t kExcerpt = 400;
    throw ScriptMissError("no scripted rule matches prompt: " +
                          (prompt.size() > kExcerpt ? prompt.substr(0, kExcerpt) + "..." : prompt));
}

std::vector<int> ScriptedChatModel::usage() const {
    std::lock_guard lock(mutex_);
    std::vector<int> out;
    out.reserve(rules_.size());
    for (const auto& compiled : rules_) {
        out.push_back(compiled.used);
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

HashEmbeddingModel::HashEmbeddingModel(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) {
        throw ConfigError("embedding dimension must be positive");
    }
}

std::vector<EmbeddingVector> HashEmbeddingModel::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> values(dimension_, 0.0);
        const auto terms = text::lexical_terms(text);
        for (std::size_t i = 0; i < terms.size(); ++i) {
            values[fnv1a64(terms[i]) % dimension_] += 1.0;
            if (i + 1 < terms.size()) {
                values[fnv1a64(terms[i] + " " + terms[i + 1]) % dimension_] += 0.5;
            }
        }
        if (terms.empty()) {
            values[fnv1a64(text::trim(text)) % dimension_] = 1.0;
        }
        double norm = 0.0;
        for (double v : values) {
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : values) {
            v /= norm;
        }
        out.emplace_back(std::move(values));
    }
    return out;
}

std::vector<ScriptedRule> parse_script_table(const nlohmann::json& table) {
    if (!table.is_array()) {
        throw ConfigError("script table must be a JSON array");
    }
    std::vector<ScriptedRule> rules;
    for (const auto& entry : table) {
        ScriptedRule rule;
        try {
            rule.match = entry.at("match").get<std::string>();
            rule.response = entry.at("response").get<std::string>();
            const auto kind = entry.value("match_kind", std::string("substring"));
            if (kind == "substring") {
                rule.match_kind = MatchKind::substring;
            } else if (kind == "regex") {
                rule.match_kind = MatchKind::regex;
            } else {
                throw ConfigError("unknown match_kind '" + kind + "'");
            }
            if (entry.contains("call_budget") && !entry.at("call_budget").is_null()) {
                rule.call_budget = entry.at("call_budget").get<int>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed script rule: ") + e.what());
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::vector<ScriptedRule> load_script_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open script table " + path);
    }
    try {
        return parse_script_table(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("script table " + path + " is not valid JSON: " + e.what());
    }
}

std::shared_ptr<ChatModel> make_chat_model(const BackendConfig& config) {
    config.validate(true);
    if (config.kind == BackendKind::http_chat) {
        return std::make_shared<HttpChatModel>(config);
    }
    auto rules = config.script;
    if (!config.script_path.empty()) {
        auto loaded = load_script_table(config.script_path);
        rules.insert(rules.end(), loaded.begin(), loaded.end());
    }
    return std::make_shared<ScriptedChatModel>(std::move(rules));
}

std::shared_ptr<EmbeddingModel> make_embedding_model(const BackendConfig& config) {
    config.validate(false);
    if (config.kind == BackendKind::http_chat) {
        return std::make_shared<HttpEmbeddingModel>(config);
    }
    return std::make_shared<HashEmbeddingModel>(config.embedding_dimension);
}

} // namespace rolekit::llm
