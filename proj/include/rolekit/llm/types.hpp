#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rolekit::llm {

enum class Role { user, assistant };

std::string_view role_name(Role role) noexcept;

struct ChatMessage {
    Role role;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
    // Template id of the prompt that produced this request. Shows up in the
    // call log and the rendered prompt; never sent over the wire.
    std::string task;
    std::string system_prompt;
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    double top_p = 1.0;
    std::optional<int> max_tokens; // unset = unlimited
    // Side-channel values for in-process backends (never serialized).
    std::map<std::string, std::string> metadata;

    /// Throws InputError when messages are empty or sampling values are out
    /// of range.
    void validate() const;
};

/// Deterministic text form of a request: "[task:<id>]", then a "[system]"
/// block and one "[user]"/"[assistant]" block per message. Scripted
/// matchers and call logs operate on this rendering.
std::string render_prompt(const ChatRequest& request);

/// Chat-completions request body with a fixed key order.
nlohmann::ordered_json to_wire_json(const ChatRequest& request, const std::string& model);

/// `to_wire_json(...).dump()`; byte-identical for equal requests.
std::string serialize_request(const ChatRequest& request, const std::string& model);

enum class MatchKind { substring, regex };

struct ScriptedRule {
    std::string match;
    MatchKind match_kind = MatchKind::substring;
    std::string response;
    std::optional<int> call_budget;
};

enum class BackendKind { http_chat, scripted };

struct BackendConfig {
    BackendKind kind = BackendKind::scripted;
    std::string endpoint_url;
    std::string model_name;
    std::string api_key_env;
    std::chrono::milliseconds request_timeout{60'000};
    int retry_count = 2;
    std::chrono::milliseconds retry_backoff{250};
    std::vector<ScriptedRule> script;
    std::string script_path;
    std::size_t embedding_dimension = 256; // scripted embedder only

    /// `for_chat` distinguishes chat backends (scripted needs a script) from
    /// embedding backends (scripted = hash embedder, no script).
    void validate(bool for_chat) const;
};

class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t dimension() const noexcept { return values_.size(); }
    double norm() const noexcept;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    std::vector<double> values_;
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) noexcept;

BackendKind parse_backend_kind(const std::string& name);
std::string_view backend_kind_name(BackendKind kind) noexcept;

/// JSON config object: {kind, endpoint_url, model, api_key_env,
/// request_timeout_ms, retry_count, retry_backoff_ms, script_path,
/// embedding_dimension}. Missing keys keep `base` values.
BackendConfig backend_config_from_json(const nlohmann::json& j, BackendConfig base = {});
nlohmann::json backend_config_to_json(const BackendConfig& config);

} // namespace rolekit::llm
