#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "rolekit/llm/types.hpp"

namespace rolekit::llm {

class ChatModel {
public:
    virtual ~ChatModel() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

class EmbeddingModel {
public:
    virtual ~EmbeddingModel() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

/// Replays canned responses. Rules are tried in order against the rendered
/// prompt; the first match with budget left wins. A prompt no rule matches
/// raises ScriptMissError.
class ScriptedChatModel final : public ChatModel {
public:
    explicit ScriptedChatModel(std::vector<ScriptedRule> rules);

    std::string complete(const ChatRequest& request) override;

    /// Calls consumed per rule, in rule order.
    std::vector<int> usage() const;

private:
    struct CompiledRule {
        ScriptedRule rule;
        int used = 0;
    };

    mutable std::mutex mutex_;
    std::vector<CompiledRule> rules_;
};

/// Wraps a callable; handy for tests that need responses computed from
/// the request (identity rewriters, fault injection).
class CallbackChatModel final : public ChatModel {
public:
    using Callback = std::function<std::string(const ChatRequest&)>;

    explicit CallbackChatModel(Callback callback) : callback_(std::move(callback)) {}

    std::string complete(const ChatRequest& request) override { return callback_(request); }

private:
    Callback callback_;
};

/// Deterministic feature-hashing embedder. Features are the lexical terms
/// (weight 1.0) and adjacent term bigrams joined by a space (weight 0.5),
/// bucketed by FNV-1a 64 modulo the dimension, then L2-normalized. Text
/// without any term hashes as a whole into a single bucket.
class HashEmbeddingModel final : public EmbeddingModel {
public:
    explicit HashEmbeddingModel(std::size_t dimension = 256);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

    std::size_t dimension() const noexcept { return dimension_; }

private:
    std::size_t dimension_;
};

std::uint64_t fnv1a64(std::string_view data) noexcept;

/// Chat-completions client (POST <endpoint>/chat/completions). Retries
/// transport failures and 5xx with exponential backoff; 4xx fails at once.
class HttpChatModel final : public ChatModel {
public:
    explicit HttpChatModel(BackendConfig config);

    std::string complete(const ChatRequest& request) override;

private:
    BackendConfig config_;
};

/// Embeddings client (POST <endpoint>/embeddings).
class HttpEmbeddingModel final : public EmbeddingModel {
public:
    explicit HttpEmbeddingModel(BackendConfig config);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

private:
    BackendConfig config_;
};

/// Script table JSON: array of {match, match_kind: "substring"|"regex",
/// response, call_budget?}.
std::vector<ScriptedRule> parse_script_table(const nlohmann::json& table);
std::vector<ScriptedRule> load_script_table(const std::string& path);

std::shared_ptr<ChatModel> make_chat_model(const BackendConfig& config);
std::shared_ptr<EmbeddingModel> make_embedding_model(const BackendConfig& config);

} // namespace rolekit::llm
