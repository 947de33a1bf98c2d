#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolekit/llm/client.hpp"
#include "rolekit/pipeline/pipeline.hpp"
#include "rolekit/profile/persona.hpp"
#include "rolekit/prompts/prompt_library.hpp"

namespace rolekit::service {

/// On-disk layout under one data root:
///   books/<book_id>/            ingest output, plus graph/ for the memory graph
///   personas/<slug>/            persona bundle, plus utterance_index/
///   sessions/<session_id>.json
///   traces/<trace_id>.json
class DataRoot {
public:
    explicit DataRoot(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path book_dir(const std::string& book_id) const;
    std::filesystem::path graph_dir(const std::string& book_id) const;
    std::filesystem::path personas_dir() const;
    std::filesystem::path persona_dir(const std::string& name) const;
    std::filesystem::path sessions_dir() const;
    std::filesystem::path traces_dir() const;

private:
    std::filesystem::path root_;
};

/// Directory name for a persona: path separators, control characters and
/// whitespace become '_'; other UTF-8 is kept.
std::string persona_slug(const std::string& name);

struct PersonaSummary {
    std::string name;
    std::string source_book;
    std::size_t utterances = 0;
    bool has_memory = false;
};

struct ChatSession {
    std::string session_id;
    std::string persona;
    std::vector<pipeline::HistoryEntry> history;
    pipeline::PipelineConfig config;
    std::string created_at;
    std::string updated_at;
};

nlohmann::ordered_json session_to_json(const ChatSession& session);
ChatSession session_from_json(const nlohmann::json& j);

/// Strict FIFO mutual exclusion: waiters acquire in arrival order.
class FifoLock {
public:
    /// Throws Error(busy) when `max_waiting` requests are already queued.
    void lock(std::size_t max_waiting);
    void unlock();

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::uint64_t next_ticket_ = 0;
    std::uint64_t serving_ = 0;
};

struct ServiceOptions {
    pipeline::PipelineConfig default_config;
    std::size_t max_queued_turns = 16;
};

/// Persona and session lifecycle over a data root. Safe for concurrent
/// use; turns on one session run one at a time, in arrival order.
class SessionService {
public:
    SessionService(DataRoot root, std::shared_ptr<const llm::LlmClient> client,
                   std::shared_ptr<const llm::Embedder> embedder,
                   std::shared_ptr<const prompts::PromptLibrary> prompts, ServiceOptions options = {});

    std::vector<PersonaSummary> list_personas() const;
    /// profile.json-shaped view plus common_words; NotFoundError when absent.
    nlohmann::ordered_json get_persona(const std::string& name) const;
    /// Applies a partial profile edit, validates and saves it.
    nlohmann::ordered_json update_persona(const std::string& name, const nlohmann::json& edit);

    /// `config` holds overrides of the service default; null keeps it.
    ChatSession create_session(const std::string& persona, const nlohmann::json& config = nullptr);
    ChatSession get_session(const std::string& session_id) const;
    ChatSession update_session_config(const std::string& session_id, const nlohmann::json& overrides);
    std::vector<std::string> list_sessions() const;

    /// Runs one turn. A failed turn persists its partial trace, leaves the
    /// history unchanged and rethrows as TurnError.
    pipeline::PipelineTrace post_message(const std::string& session_id, const std::string& text);

    pipeline::PipelineTrace get_trace(const std::string& trace_id) const;

    const DataRoot& data_root() const noexcept { return root_; }
    const pipeline::PipelineConfig& default_config() const noexcept { return options_.default_config; }

    /// Loaded bundle, memory graph and utterance index for a persona,
    /// cached until the persona is edited.
    std::shared_ptr<const pipeline::PersonaContext> persona_context(const std::string& name) const;

private:
    struct SessionSlot {
        FifoLock turn_lock;
        std::mutex state_mutex;
        ChatSession session;
    };

    std::filesystem::path find_persona_dir(const std::string& name) const;
    std::shared_ptr<SessionSlot> slot(const std::string& session_id) const;
    void save_session(const ChatSession& session) const;
    void save_trace(const pipeline::PipelineTrace& trace) const;

    DataRoot root_;
    std::shared_ptr<const llm::LlmClient> client_;
    std::shared_ptr<const llm::Embedder> embedder_;
    std::shared_ptr<const prompts::PromptLibrary> prompts_;
    ServiceOptions options_;
    pipeline::Pipeline pipeline_;

    mutable std::mutex mutex_;
    mutable std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
    mutable std::map<std::string, std::shared_ptr<const pipeline::PersonaContext>> personas_;
    mutable std::mutex persona_write_mutex_;
};

/// HTTP status for an error code.
int http_status_for(ErrorCode code) noexcept;
nlohmann::ordered_json error_body(const Error& error);

/// JSON API over a SessionService (see README for the routes).
class HttpServer {
public:
    explicit HttpServer(SessionService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the listening socket; port 0 picks a free port. Throws
    /// ConfigError when the address cannot be bound. Returns the port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); requires a successful bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace rolekit::service
