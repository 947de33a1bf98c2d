#include "rolekit/llm/types.hpp"

#include <cmath>

#include "rolekit/error.hpp"

namespace rolekit::llm {

std::string_view role_name(Role role) noexcept {
    return role == Role::user ? "user" : "assistant";
}

void ChatRequest::validate() const {
    if (messages.empty()) {
        throw InputError("chat request for task '" + task + "' has no messages");
    }
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw InputError("temperature must lie in [0, 2]");
    }
    if (!(top_p > 0.0 && top_p <= 1.0)) {
        throw InputError("top_p must lie in (0, 1]");
    }
    if (max_tokens && *max_tokens <= 0) {
        throw InputError("max_tokens must be positive");
    }
}

std::string render_prompt(const ChatRequest& request) {
    std::string out;
    out += "[task:" + request.task + "]\n";
    out += "[system]\n";
    out += request.system_prompt;
    out += '\n';
    for (const auto& message : request.messages) {
        out += '[';
        out += role_name(message.role);
        out += "]\n";
        out += message.content;
        out += '\n';
    }
    return out;
}

nlohmann::ordered_json to_wire_json(const ChatRequest& request, const std::string& model) {
    nlohmann::ordered_json body;
    body["model"] = model;
    auto messages = nlohmann::ordered_json::array();
    if (!request.system_prompt.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    }
    for (const auto& message : request.messages) {
        messages.push_back({{"role", std::string(role_name(message.role))}, {"content", message.content}});
    }
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;
    body["top_p"] = request.top_p;
    if (request.max_tokens) {
        body["max_tokens"] = *request.max_tokens;
    }
    return body;
}

std::string serialize_request(const ChatRequest& request, const std::string& model) {
    return to_wire_json(request, model).dump();
}

void BackendConfig::validate(bool for_chat) const {
    if (kind == BackendKind::http_chat) {
        if (endpoint_url.empty()) {
            throw ConfigError("http backend requires endpoint_url");
        }
    } else if (for_chat && script.empty() && script_path.empty()) {
        throw ConfigError("scripted chat backend requires a script table");
    } else if (!for_chat && embedding_dimension == 0) {
        throw ConfigError("scripted embedder requires a positive dimension");
    }
    if (retry_count < 0) {
        throw ConfigError("retry_count must be >= 0");
    }
}

double EmbeddingVector::norm() const noexcept {
    double sum = 0.0;
    for (double v : values_) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) noexcept {
    const auto& x = a.values();
    const auto& y = b.values();
    if (x.size() != y.size() || x.empty()) {
        return 0.0;
    }
    double dot = 0.0;
    double nx = 0.0;
    double ny = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if (nx == 0.0 || ny == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(nx) * std::sqrt(ny));
}

BackendKind parse_backend_kind(const std::string& name) {
    if (name == "http_chat" || name == "http") {
        return BackendKind::http_chat;
    }
    if (name == "scripted") {
        return BackendKind::scripted;
    }
    throw ConfigError("unknown backend kind '" + name + "'");
}

std::string_view backend_kind_name(BackendKind kind) noexcept {
    return kind == BackendKind::http_chat ? "http_chat" : "scripted";
}

BackendConfig backend_config_from_json(const nlohmann::json& j, BackendConfig base) {
    if (!j.is_object()) {
        throw ConfigError("backend config must be a JSON object");
    }
    try {
        if (j.contains("kind")) base.kind = parse_backend_kind(j.at("kind").get<std::string>());
        if (j.contains("endpoint_url")) base.endpoint_url = j.at("endpoint_url").get<std::string>();
        if (j.contains("model")) base.model_name = j.at("model").get<std::string>();
        if (j.contains("api_key_env")) base.api_key_env = j.at("api_key_env").get<std::string>();
        if (j.contains("request_timeout_ms")) {
            base.request_timeout = std::chrono::milliseconds(j.at("request_timeout_ms").get<long long>());
        }
        if (j.contains("retry_count")) base.retry_count = j.at("retry_count").get<int>();
        if (j.contains("retry_backoff_ms")) {
            base.retry_backoff = std::chrono::milliseconds(j.at("retry_backoff_ms").get<long long>());
        }
        if (j.contains("script_path")) base.script_path = j.at("script_path").get<std::string>();
        if (j.contains("embedding_dimension")) {
            base.embedding_dimension = j.at("embedding_dimension").get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid backend config: ") + e.what());
    }
    return base;
}

nlohmann::json backend_config_to_json(const BackendConfig& config) {
    return {
        {"kind", std::string(backend_kind_name(config.kind))},
        {"endpoint_url", config.endpoint_url},
        {"model", config.model_name},
        {"api_key_env", config.api_key_env},
        {"request_timeout_ms", config.request_timeout.count()},
        {"retry_count", config.retry_count},
        {"retry_backoff_ms", config.retry_backoff.count()},
        {"script_path", config.script_path},
        {"embedding_dimension", config.embedding_dimension},
    };
}

} // namespace rolekit::llm
