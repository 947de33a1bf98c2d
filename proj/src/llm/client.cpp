#include "rolekit/llm/client.hpp"

#include <chrono>

#include "rolekit/text/utf8.hpp"

namespace rolekit::llm {

namespace {

using Clock = std::chrono::steady_clock;

std::chrono::microseconds since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
}

} // namespace

LlmClient::LlmClient(std::shared_ptr<ChatModel> model, std::shared_ptr<CallLog> log)
    : model_(std::move(model)), log_(std::move(log)) {
    if (!model_ || !log_) {
        throw ConfigError("LlmClient requires a model and a call log");
    }
}

std::string LlmClient::complete(const ChatRequest& request) const {
    request.validate();
    CallRecord record;
    record.kind = CallKind::chat;
    record.task = request.task;
    record.prompt = render_prompt(request);
    record.temperature = request.temperature;
    record.top_p = request.top_p;
    const auto start = Clock::now();
    try {
        record.response = model_->complete(request);
    } catch (const std::exception& e) {
        record.latency = since(start);
        record.ok = false;
        record.error = e.what();
        log_->append(std::move(record));
        throw;
    }
    record.latency = since(start);
    auto response = record.response;
    log_->append(std::move(record));
    return response;
}

Embedder::Embedder(std::shared_ptr<EmbeddingModel> model, std::shared_ptr<CallLog> log)
    : model_(std::move(model)), log_(std::move(log)) {
    if (!model_ || !log_) {
        throw ConfigError("Embedder requires a model and a call log");
    }
}

std::vector<EmbeddingVector> Embedder::embed(const std::vector<std::string>& texts) const {
    if (texts.empty()) {
        throw InputError("embed called with no texts");
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (text::trim(texts[i]).empty()) {
            throw InputError("embed input " + std::to_string(i) + " is empty");
        }
    }
    CallRecord record;
    record.kind = CallKind::embed;
    record.task = "embed";
    record.prompt = std::to_string(texts.size()) + " texts";
    const auto start = Clock::now();
    std::vector<EmbeddingVector> vectors;
    try {
        vectors = model_->embed(texts);
    } catch (const std::exception& e) {
        record.latency = since(start);
        record.ok = false;
        record.error = e.what();
        log_->append(std::move(record));
        throw;
    }
    record.latency = since(start);
    log_->append(std::move(record));

    if (vectors.size() != texts.size()) {
        throw InternalError("embedding backend returned " + std::to_string(vectors.size()) +
                            " vectors for " + std::to_string(texts.size()) + " texts");
    }
    const auto dim = vectors.front().dimension();
    for (const auto& v : vectors) {
        if (v.dimension() != dim || dim == 0) {
            throw InternalError("embedding dimension mismatch within batch");
        }
    }
    return vectors;
}

EmbeddingVector Embedder::embed_one(const std::string& text) const {
    return embed({text}).front();
}

} // namespace rolekit::llm
