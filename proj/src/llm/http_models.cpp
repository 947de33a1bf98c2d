#include <cstdlib>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "rolekit/error.hpp"
#include "rolekit/llm/models.hpp"

namespace rolekit::llm {

namespace {

struct Endpoint {
    std::string origin;    // scheme://host[:port]
    std::string base_path; // "" or "/v1"
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint_url must include a scheme: " + url);
    }
    const auto path_begin = url.find('/', scheme_end + 3);
    Endpoint ep;
    if (path_begin == std::string::npos) {
        ep.origin = url;
    } else {
        ep.origin = url.substr(0, path_begin);
        ep.base_path = url.substr(path_begin);
        while (!ep.base_path.empty() && ep.base_path.back() == '/') {
            ep.base_path.pop_back();
        }
    }
    return ep;
}

httplib::Headers auth_headers(const BackendConfig& config) {
    httplib::Headers headers;
    if (!config.api_key_env.empty()) {
        if (const char* key = std::getenv(config.api_key_env.c_str()); key != nullptr && *key != '\0') {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    return headers;
}

/// POSTs `body` with retry. Returns the 2xx response body.
std::string post_with_retry(const BackendConfig& config, const std::string& route, const std::string& body) {
    const auto ep = split_endpoint(config.endpoint_url);
    const auto path = ep.base_path + route;
    const auto headers = auth_headers(config);
    const int attempts = 1 + std::max(0, config.retry_count);

    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client client(ep.origin);
        const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(config.request_timeout).count();
        client.set_connection_timeout(timeout_us / 1'000'000, timeout_us % 1'000'000);
        client.set_read_timeout(timeout_us / 1'000'000, timeout_us % 1'000'000);
        client.set_write_timeout(timeout_us / 1'000'000, timeout_us % 1'000'000);

        auto result = client.Post(path, headers, body, "application/json");
        if (result) {
            const int status = result->status;
            if (status >= 200 && status < 300) {
                return result->body;
            }
            if (status >= 400 && status < 500) {
                throw BackendError("backend returned HTTP " + std::to_string(status) + ": " + result->body, status);
            }
            last_error = "HTTP " + std::to_string(status);
            if (attempt == attempts) {
                throw BackendError("backend returned HTTP " + std::to_string(status) + " after " +
                                       std::to_string(attempts) + " attempts: " + result->body,
                                   status);
            }
        } else {
            last_error = httplib::to_string(result.error());
        }
        if (attempt < attempts) {
            std::this_thread::sleep_for(config.retry_backoff * (1LL << (attempt - 1)));
        }
    }
    throw TransportError("request to " + ep.origin + path + " failed after " + std::to_string(attempts) +
                             " attempts: " + last_error,
                         attempts);
}

} // namespace

HttpChatModel::HttpChatModel(BackendConfig config) : config_(std::move(config)) {
    config_.validate(true);
}

std::string HttpChatModel::complete(const ChatRequest& request) {
    const auto raw = post_with_retry(config_, "/chat/completions", serialize_request(request, config_.model_name));
    try {
        const auto j = nlohmann::json::parse(raw);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("unexpected chat-completions response: ") + e.what(), 200);
    }
}

HttpEmbeddingModel::HttpEmbeddingModel(BackendConfig config) : config_(std::move(config)) {
    config_.validate(false);
}

std::vector<EmbeddingVector> HttpEmbeddingModel::embed(const std::vector<std::string>& texts) {
    nlohmann::ordered_json body;
    body["model"] = config_.model_name;
    body["input"] = texts;
    const auto raw = post_with_retry(config_, "/embeddings", body.dump());
    try {
        const auto j = nlohmann::json::parse(raw);
        const auto& data = j.at("data");
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<bool> seen(texts.size(), false);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& item = data.at(i);
            const auto index = item.value("index", i);
            if (index >= texts.size() || seen[index]) {
                throw BackendError("embedding response has bad index", 200);
            }
            seen[index] = true;
            out[index] = EmbeddingVector(item.at("embedding").get<std::vector<double>>());
        }
        if (data.size() != texts.size()) {
            throw BackendError("embedding response count mismatch", 200);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("unexpected embeddings response: ") + e.what(), 200);
    }
}

} // namespace rolekit::llm
