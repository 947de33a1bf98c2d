#include "rolekit/service/session_service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "rolekit/error.hpp"
#include "rolekit/memory/memory_graph.hpp"
#include "rolekit/text/utf8.hpp"
#include "rolekit/util/files.hpp"

namespace rolekit::service {

namespace {

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 128) {
        return false;
    }
    for (unsigned char c : id) {
        if (!std::isalnum(c) && c != '-' && c != '_') {
            return false;
        }
    }
    return true;
}

std::string random_hex(std::size_t digits) {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < digits; ++i) {
        out.push_back(hex[rng() % 16]);
    }
    return out;
}

} // namespace

DataRoot::DataRoot(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path DataRoot::book_dir(const std::string& book_id) const { return root_ / "books" / book_id; }
std::filesystem::path DataRoot::graph_dir(const std::string& book_id) const { return book_dir(book_id) / "graph"; }
std::filesystem::path DataRoot::personas_dir() const { return root_ / "personas"; }
std::filesystem::path DataRoot::persona_dir(const std::string& name) const {
    return personas_dir() / persona_slug(name);
}
std::filesystem::path DataRoot::sessions_dir() const { return root_ / "sessions"; }
std::filesystem::path DataRoot::traces_dir() const { return root_ / "traces"; }

std::string persona_slug(const std::string& name) {
    std::string out;
    for (unsigned char c : std::string(text::trim(name))) {
        const bool unsafe = c < 0x20 || c == 0x7f || c == ' ' || c == '/' || c == '\\' || c == ':' || c == '*' ||
                            c == '?' || c == '"' || c == '<' || c == '>' || c == '|' || c == '\t';
        out.push_back(unsafe ? '_' : static_cast<char>(c));
    }
    if (out.empty() || out == "." || out == "..") {
        throw InputError("'" + name + "' is not a usable persona name");
    }
    return out;
}


nlohmann::ordered_json session_to_json(const ChatSession& s) {
    nlohmann::ordered_json j;
    j["session_id"] = s.session_id;
    j["persona"] = s.persona;
    j["config"] = pipeline::config_to_json(s.config);
    auto history = nlohmann::ordered_json::array();
    for (const auto& h : s.history) {
        nlohmann::ordered_json e;
        e["user"] = h.user;
        e["assistant"] = h.assistant;
        e["trace_id"] = h.trace_id;
        history.push_back(e);
    }
    j["history"] = history;
    j["created_at"] = s.created_at;
    j["updated_at"] = s.updated_at;
    return j;
}

ChatSession session_from_json(const nlohmann::json& j) {
    ChatSession s;
    try {
        s.session_id = j.at("session_id").get<std::string>();
        s.persona = j.at("persona").get<std::string>();
        s.config = pipeline::config_from_json(j.at("config"));
        for (const auto& e : j.at("history")) {
            s.history.push_back({e.at("user").get<std::string>(), e.at("assistant").get<std::string>(),
                                 e.at("trace_id").get<std::string>()});
        }
        s.created_at = j.at("created_at").get<std::string>();
        s.updated_at = j.at("updated_at").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("malformed session record: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(std::string("malformed session config: ") + e.what());
    }
    return s;
}

void FifoLock::lock(std::size_t max_waiting) {
    std::unique_lock lock(mutex_);
    if (next_ticket_ - serving_ > max_waiting) {
        throw Error(ErrorCode::busy, "too many turns queued for this session");
    }
    const auto ticket = next_ticket_++;
    cv_.wait(lock, [&] { return serving_ == ticket; });
}

void FifoLock::unlock() {
    {
        std::lock_guard lock(mutex_);
        ++serving_;
    }
    cv_.notify_all();
}

SessionService::SessionService(DataRoot root, std::shared_ptr<const llm::LlmClient> client,
                               std::shared_ptr<const llm::Embedder> embedder,
                               std::shared_ptr<const prompts::PromptLibrary> prompts, ServiceOptions options)
    : root_(std::move(root)),
      client_(std::move(client)),
      embedder_(std::move(embedder)),
      prompts_(std::move(prompts)),
      options_(std::move(options)),
      pipeline_(client_, prompts_) {
    if (!embedder_) {
        throw ConfigError("session service needs an embedder");
    }
    options_.default_config.validate();
    std::filesystem::create_directories(root_.sessions_dir());
    std::filesystem::create_directories(root_.traces_dir());
    std::filesystem::create_directories(root_.personas_dir());
}

std::filesystem::path SessionService::find_persona_dir(const std::string& name) const {
    const auto dir = root_.persona_dir(name);
    if (std::filesystem::exists(dir / "profile.json")) {
        return dir;
    }
    std::string known;
    for (const auto& p : list_personas()) {
        known += (known.empty() ? "" : ", ") + p.name;
    }
    throw NotFoundError("unknown persona '" + name + "'" + (known.empty() ? "" : " (known: " + known + ")"));
}

std::vector<PersonaSummary> SessionService::list_personas() const {
    std::vector<PersonaSummary> out;
    if (!std::filesystem::exists(root_.personas_dir())) {
        return out;
    }
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root_.personas_dir())) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "profile.json")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        const auto j = nlohmann::json::parse(read_file(dir / "profile.json"), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            continue;
        }
        PersonaSummary s;
        s.name = j.value("canonical_name", dir.filename().string());
        s.source_book = j.value("source_book", std::string());
        std::ifstream utterances(dir / "utterances.jsonl");
        for (std::string line; std::getline(utterances, line);) {
            s.utterances += text::trim(line).empty() ? 0 : 1;
        }
        s.has_memory = !s.source_book.empty() && std::filesystem::exists(root_.graph_dir(s.source_book) / "manifest.json");
        out.push_back(std::move(s));
    }
    return out;
}

nlohmann::ordered_json SessionService::get_persona(const std::string& name) const {
    const auto dir = find_persona_dir(name);
    const auto bundle = profile::load_bundle(dir);
    auto j = profile::profile_to_json(bundle);
    j["common_words"] = profile::common_words_to_json(bundle.style);
    j["utterance_count"] = bundle.utterances.size();
    j["has_memory"] = std::filesystem::exists(root_.graph_dir(bundle.source_book) / "manifest.json");
    return j;
}

nlohmann::ordered_json SessionService::update_persona(const std::string& name, const nlohmann::json& edit) {
    {
        std::lock_guard write(persona_write_mutex_);
        const auto dir = find_persona_dir(name);
        auto bundle = profile::apply_edit(profile::load_bundle(dir), edit);
        profile::save_bundle(bundle, dir);
        std::lock_guard lock(mutex_);
        personas_.erase(dir.filename().string());
    }
    return get_persona(name);
}

std::shared_ptr<const pipeline::PersonaContext> SessionService::persona_context(const std::string& name) const {
    const auto dir = find_persona_dir(name);
    const auto key = dir.filename().string();
    {
        std::lock_guard lock(mutex_);
        const auto it = personas_.find(key);
        if (it != personas_.end()) {
            return it->second;
        }
    }
    std::lock_guard write(persona_write_mutex_);
    auto ctx = std::make_shared<pipeline::PersonaContext>();
    auto bundle = std::make_shared<profile::PersonaBundle>(profile::load_bundle(dir));
    const auto graph_dir = root_.graph_dir(bundle->source_book);
    if (std::filesystem::exists(graph_dir / "manifest.json")) {
        ctx->graph = std::make_shared<const memory::MemoryGraph>(memory::MemoryGraph::load(graph_dir, embedder_));
    }
    ctx->utterance_index = profile::load_or_build_utterance_index(*bundle, dir, embedder_);
    ctx->bundle = std::move(bundle);
    std::lock_guard lock(mutex_);
    return personas_.emplace(key, std::move(ctx)).first->second;
}

ChatSession SessionService::create_session(const std::string& persona, const nlohmann::json& config) {
    const auto ctx = persona_context(persona);
    ChatSession s;
    s.session_id = random_hex(16);
    s.persona = ctx->bundle->canonical_name;
    s.config = pipeline::config_from_json(config, options_.default_config);
    s.created_at = s.updated_at = now_iso8601();
    save_session(s);
    auto slot = std::make_shared<SessionSlot>();
    slot->session = s;
    std::lock_guard lock(mutex_);
    sessions_[s.session_id] = std::move(slot);
    return s;
}

std::shared_ptr<SessionService::SessionSlot> SessionService::slot(const std::string& session_id) const {
    if (!valid_id(session_id)) {
        throw NotFoundError("unknown session '" + session_id + "'");
    }
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(session_id);
    if (it != sessions_.end()) {
        return it->second;
    }
    const auto path = root_.sessions_dir() / (session_id + ".json");
    if (!std::filesystem::exists(path)) {
        throw NotFoundError("unknown session '" + session_id + "'");
    }
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) {
        throw LoadError("malformed session file " + path.string());
    }
    auto slot = std::make_shared<SessionSlot>();
    slot->session = session_from_json(j);
    sessions_[session_id] = slot;
    return slot;
}

ChatSession SessionService::get_session(const std::string& session_id) const {
    auto s = slot(session_id);
    std::lock_guard lock(s->state_mutex);
    return s->session;
}

ChatSession SessionService::update_session_config(const std::string& session_id, const nlohmann::json& overrides) {
    auto s = slot(session_id);
    s->turn_lock.lock(options_.max_queued_turns);
    struct Release {
        FifoLock& l;
        ~Release() { l.unlock(); }
    } release{s->turn_lock};
    std::lock_guard lock(s->state_mutex);
    auto updated = s->session;
    updated.config = pipeline::config_from_json(overrides, updated.config);
    updated.updated_at = now_iso8601();
    save_session(updated);
    s->session = updated;
    return updated;
}

std::vector<std::string> SessionService::list_sessions() const {
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(root_.sessions_dir())) {
        if (entry.path().extension() == ".json") {
            out.push_back(entry.path().stem().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void SessionService::save_session(const ChatSession& session) const {
    util::write_file_atomic(root_.sessions_dir() / (session.session_id + ".json"),
                            session_to_json(session).dump(2) + "\n");
}

void SessionService::save_trace(const pipeline::PipelineTrace& trace) const {
    util::write_file_atomic(root_.traces_dir() / (trace.trace_id + ".json"),
                            pipeline::trace_to_json(trace).dump(2) + "\n");
}

pipeline::PipelineTrace SessionService::post_message(const std::string& session_id, const std::string& text) {
    auto s = slot(session_id);
    if (text::trim(text).empty()) {
        throw InputError("message text must not be empty");
    }
    s->turn_lock.lock(options_.max_queued_turns);
    struct Release {
        FifoLock& l;
        ~Release() { l.unlock(); }
    } release{s->turn_lock};

    ChatSession session;
    {
        std::lock_guard lock(s->state_mutex);
        session = s->session;
    }
    const auto ctx = persona_context(session.persona);
    const auto trace_id = session.session_id + "-" + std::to_string(session.history.size());
    auto history = session.history;
    try {
        auto trace = pipeline_.run_turn(*ctx, history, text, session.config, trace_id);
        save_trace(trace);
        session.history = std::move(history);
        session.updated_at = now_iso8601();
        save_session(session);
        std::lock_guard lock(s->state_mutex);
        s->session = std::move(session);
        return trace;
    } catch (const pipeline::TurnError& e) {
        auto partial = e.partial_trace();
        partial.trace_id = trace_id + "-failed-" + random_hex(6);
        save_trace(partial);
        throw pipeline::TurnError(e, std::move(partial));
    }
}

pipeline::PipelineTrace SessionService::get_trace(const std::string& trace_id) const {
    if (!valid_id(trace_id)) {
        throw NotFoundError("unknown trace '" + trace_id + "'");
    }
    const auto path = root_.traces_dir() / (trace_id + ".json");
    if (!std::filesystem::exists(path)) {
        throw NotFoundError("unknown trace '" + trace_id + "'");
    }
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) {
        throw LoadError("malformed trace file " + path.string());
    }
    return pipeline::trace_from_json(j);
}

} // namespace rolekit::service
