#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rolekit/error.hpp"
#include "rolekit/llm/call_log.hpp"
#include "rolekit/llm/models.hpp"

namespace rolekit::llm {

/// Logged access to a chat backend. Every chat call in the system goes
/// through `complete`. Safe for concurrent use when the model is.
class LlmClient {
public:
    explicit LlmClient(std::shared_ptr<ChatModel> model,
                       std::shared_ptr<CallLog> log = std::make_shared<CallLog>());

    std::string complete(const ChatRequest& request) const;

    const std::shared_ptr<CallLog>& log() const noexcept { return log_; }

private:
    std::shared_ptr<ChatModel> model_;
    std::shared_ptr<CallLog> log_;
};

/// Logged, validated access to an embedding backend.
class Embedder {
public:
    explicit Embedder(std::shared_ptr<EmbeddingModel> model,
                      std::shared_ptr<CallLog> log = std::make_shared<CallLog>());

    /// Throws InputError on an empty batch or blank text; InternalError when
    /// the backend returns a wrong count or mixed dimensions.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const;
    EmbeddingVector embed_one(const std::string& text) const;

    const std::shared_ptr<CallLog>& log() const noexcept { return log_; }

private:
    std::shared_ptr<EmbeddingModel> model_;
    std::shared_ptr<CallLog> log_;
};

/// Issues `request`, hands the reply to `parse` (which throws ParseError on
/// bad output), and on failure sends exactly one repair request built by
/// `make_repair(raw_reply, reason)`. A second failure rethrows ParseError.
template <class Parse>
auto complete_structured(const LlmClient& client, const ChatRequest& request, Parse parse,
                         const std::function<ChatRequest(const std::string&, const std::string&)>& make_repair)
    -> decltype(parse(std::string{})) {
    const auto first = client.complete(request);
    try {
        return parse(first);
    } catch (const ParseError& e) {
        const auto second = client.complete(make_repair(first, e.what()));
        return parse(second);
    }
}

} // namespace rolekit::llm
