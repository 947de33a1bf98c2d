#include "rolekit/cli/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "rolekit/error.hpp"
#include "rolekit/ingest/corpus.hpp"
#include "rolekit/judge/judge.hpp"
#include "rolekit/llm/client.hpp"
#include "rolekit/memory/memory_graph.hpp"
#include "rolekit/profile/persona.hpp"
#include "rolekit/service/session_service.hpp"
#include "rolekit/util/files.hpp"
#include "rolekit/text/utf8.hpp"

namespace rolekit::cli {

namespace {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) {
        return {};
    }
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

struct Runtime {
    CliConfig config;
    std::shared_ptr<const prompts::PromptLibrary> prompts;
    std::shared_ptr<const llm::Embedder> embedder;

    explicit Runtime(CliConfig c) : config(std::move(c)) {
        auto lib = std::make_shared<prompts::PromptLibrary>(prompts::PromptLibrary::builtin());
        if (!config.prompts_dir.empty()) {
            lib->load_directory(config.prompts_dir);
        }
        prompts = std::move(lib);
        config.embedding.validate(false);
        embedder = std::make_shared<llm::Embedder>(llm::make_embedding_model(config.embedding));
    }

    std::shared_ptr<llm::LlmClient> chat_client() const {
        if (config.chat.kind == llm::BackendKind::scripted && config.chat.script.empty() &&
            config.chat.script_path.empty()) {
            throw ConfigError("no chat backend configured; pass --backend-url, --script or a chat entry in --config");
        }
        config.chat.validate(true);
        return std::make_shared<llm::LlmClient>(llm::make_chat_model(config.chat));
    }

    std::shared_ptr<llm::LlmClient> judge_client() const {
        if (!config.judge) {
            return chat_client();
        }
        config.judge->validate(true);
        return std::make_shared<llm::LlmClient>(llm::make_chat_model(*config.judge));
    }

    service::DataRoot root() const { return service::DataRoot(config.data_root); }
};

void print_chat_calls(const llm::LlmClient& client, std::ostream& out) {
    out << "llm calls: " << client.log()->count(llm::CallKind::chat) << "\n";
}

std::string only_book(const service::DataRoot& root) {
    const auto books = root.root() / "books";
    std::vector<std::string> ids;
    if (std::filesystem::is_directory(books)) {
        for (const auto& e : std::filesystem::directory_iterator(books)) {
            if (std::filesystem::exists(e.path() / "chunks.json")) {
                ids.push_back(e.path().filename().string());
            }
        }
    }
    std::sort(ids.begin(), ids.end());
    if (ids.size() == 1) {
        return ids[0];
    }
    std::string known;
    for (const auto& id : ids) {
        known += (known.empty() ? "" : ", ") + id;
    }
    throw InputError(ids.empty() ? "no ingested books under " + books.string()
                                 : "several books ingested (" + known + "); pass --book");
}

nlohmann::json parse_config_value(const std::string& raw) {
    if (raw == "on" || raw == "true") {
        return true;
    }
    if (raw == "off" || raw == "false") {
        return false;
    }
    const auto j = nlohmann::json::parse(raw, nullptr, false);
    if (!j.is_discarded() && !j.is_string()) {
        return j;
    }
    return raw;
}

struct IngestArgs {
    std::string book_path;
    std::string book_id;
    std::string aliases;
    std::size_t chunk_size = ingest::kDefaultChunkSize;
    std::size_t overlap = ingest::kDefaultChunkOverlap;
};

void cmd_ingest(const Runtime& rt, const IngestArgs& args, std::ostream& out) {
    const auto text = read_text_file(args.book_path);
    ingest::IngestOptions options;
    options.chunk_size = args.chunk_size;
    options.overlap = args.overlap;
    options.parallelism = rt.config.parallelism;
    if (!args.aliases.empty()) {
        options.user_aliases = ingest::load_aliases(args.aliases);
    }
    const auto id = args.book_id.empty() ? std::filesystem::path(args.book_path).stem().string() : args.book_id;
    auto client = rt.chat_client();
    const auto dir = rt.root().book_dir(id);
    const auto store = ingest::ingest_book(id, text, options, *client, *rt.prompts, dir);
    out << "book " << id << ": " << store.chunks.size() << " chunks, " << store.merged.records.size()
        << " utterances -> " << dir.string() << "\n";
    for (const auto& [speaker, count] : ingest::speaker_counts(store.merged.records)) {
        out << "  " << speaker << "\t" << count << "\n";
    }
    print_chat_calls(*client, out);
}

struct ExtractArgs {
    std::string character;
    std::string book_id;
    bool skip_memory = false;
    bool rebuild_memory = false;
    std::size_t relevant_chunks = 20;
    std::size_t style_sample = 50;
};

void cmd_extract(const Runtime& rt, const ExtractArgs& args, std::ostream& out) {
    const auto root = rt.root();
    const auto book_id = args.book_id.empty() ? only_book(root) : args.book_id;
    const auto book = ingest::load_book(root.book_dir(book_id));
    auto client = rt.chat_client();
    const auto index = ingest::build_chunk_index(book.chunks, rt.embedder);
    profile::ProfileOptions options;
    options.relevant_chunks = args.relevant_chunks;
    options.style_sample = args.style_sample;
    options.parallelism = rt.config.parallelism;
    const auto bundle = profile::build_persona(args.character, book, index, *client, *rt.prompts, options);
    const auto persona_dir = root.persona_dir(bundle.canonical_name);
    profile::save_bundle(bundle, persona_dir);
    profile::load_or_build_utterance_index(bundle, persona_dir, rt.embedder);
    out << "persona " << bundle.canonical_name << ": " << bundle.utterances.size() << " utterances -> "
        << persona_dir.string() << "\n";
    if (!args.skip_memory) {
        const auto graph_dir = root.graph_dir(book_id);
        if (std::filesystem::exists(graph_dir / "manifest.json") && !args.rebuild_memory) {
            out << "memory graph for " << book_id << " already built; pass --rebuild-memory to redo it\n";
        } else {
            memory::GraphBuildOptions graph_options;
            graph_options.parallelism = rt.config.parallelism;
            const auto graph =
                memory::MemoryGraph::build(book_id, book.chunks, *client, *rt.prompts, rt.embedder, graph_options);
            std::filesystem::remove_all(graph_dir);
            graph.save(graph_dir);
            out << "memory graph " << book_id << ": " << graph.entities().size() << " entities, "
                << graph.relations().size() << " relations -> " << graph_dir.string() << "\n";
            for (const auto& w : graph.warnings()) {
                out << "  warning: " << w << "\n";
            }
        }
    }
    print_chat_calls(*client, out);
}

struct ChatArgs {
    std::string character;
    std::string session;
};

void print_error(std::ostream& err, const Error& e) {
    err << "error[" << error_code_name(e.code()) << "]: " << e.what() << "\n";
}

void cmd_chat(const Runtime& rt, const ChatArgs& args, std::istream& in, std::ostream& out, std::ostream& err) {
    service::ServiceOptions options;
    options.default_config = rt.config.pipeline;
    service::SessionService svc(rt.root(), rt.chat_client(), rt.embedder, rt.prompts, options);
    auto session = args.session.empty() ? svc.create_session(args.character) : svc.get_session(args.session);
    const auto name = session.persona;
    out << "session " << session.session_id << " with " << name
        << " (/trace shows the last turn, /config [key value] edits the pipeline, /quit exits)\n";
    std::optional<pipeline::PipelineTrace> last;
    for (std::string line; out << "> " << std::flush, std::getline(in, line);) {
        const auto input = std::string(text::trim(line));
        if (input.empty()) {
            continue;
        }
        if (input == "/quit" || input == "/exit") {
            break;
        }
        try {
            if (input == "/trace") {
                if (last) {
                    out << pipeline::trace_to_json(*last).dump(2) << "\n";
                } else {
                    out << "no turn yet\n";
                }
            } else if (input.rfind("/config", 0) == 0) {
                std::istringstream words(input.substr(7));
                std::string key;
                std::string value;
                words >> key;
                std::getline(words, value);
                value = std::string(text::trim(value));
                if (!key.empty()) {
                    if (value.empty()) {
                        throw InputError("usage: /config <key> <value>");
                    }
                    session = svc.update_session_config(session.session_id, {{key, parse_config_value(value)}});
                } else {
                    session = svc.get_session(session.session_id);
                }
                out << pipeline::config_to_json(session.config).dump() << "\n";
            } else if (input[0] == '/') {
                throw InputError("unknown command " + input);
            } else {
                last = svc.post_message(session.session_id, input);
                out << name << ": " << last->reply << "\n";
            }
        } catch (const pipeline::TurnError& e) {
            last = e.partial_trace();
            print_error(err, e);
        } catch (const Error& e) {
            print_error(err, e);
        }
    }
}

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_queued = 16;
};

void cmd_serve(const Runtime& rt, const ServeArgs& args, std::ostream& out) {
    service::ServiceOptions options;
    options.default_config = rt.config.pipeline;
    options.max_queued_turns = args.max_queued;
    service::SessionService svc(rt.root(), rt.chat_client(), rt.embedder, rt.prompts, options);
    service::HttpServer server(svc);
    const int port = server.bind(args.host, args.port);
    out << "listening on http://" << args.host << ":" << port << "\n" << std::flush;
    server.listen();
}

struct JudgeArgs {
    std::string samples;
    std::string out = "report.json";
};

void cmd_judge(const Runtime& rt, const JudgeArgs& args, std::ostream& out) {
    const auto samples = judge::load_samples(args.samples);
    auto client = rt.judge_client();
    judge::TournamentOptions options;
    options.parallelism = rt.config.parallelism;
    const auto report = judge::run_tournament(samples, *client, *rt.prompts, options);
    const auto j = judge::report_to_json(report);
    util::write_file_atomic(args.out, j.dump(2) + "\n");
    out << "judged " << report.pairs_judged << " pairs (" << report.pairs_failed << " failed) -> " << args.out
        << "\n";
    for (const auto& m : report.overall) {
        out << "  " << m.method << "\tcp " << m.mean.cp << "\tak " << m.mean.ak << "\tqc " << m.mean.qc << "\n";
    }
    for (const auto& w : report.warnings) {
        out << "  warning: " << w << "\n";
    }
}

} // namespace

CliConfig load_cli_config(const std::filesystem::path& path) {
    const auto raw = read_text_file(path);
    const auto j = nlohmann::json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError(path.string() + ": config must be a JSON object");
    }
    static const std::set<std::string> known = {"data_root", "prompts_dir", "parallelism", "chat",
                                                "embedding", "judge",       "pipeline"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError(path.string() + ": unknown key '" + key + "'");
        }
    }
    const auto base = path.parent_path();
    CliConfig c;
    try {
        if (j.contains("data_root")) c.data_root = resolve(base, j.at("data_root").get<std::string>());
        if (j.contains("prompts_dir")) c.prompts_dir = resolve(base, j.at("prompts_dir").get<std::string>());
        if (j.contains("parallelism")) c.parallelism = j.at("parallelism").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    auto backend = [&](const char* key, llm::BackendConfig b) {
        b = llm::backend_config_from_json(j.at(key), b);
        if (!b.script_path.empty()) {
            b.script_path = resolve(base, b.script_path).string();
        }
        return b;
    };
    if (j.contains("chat")) c.chat = backend("chat", c.chat);
    if (j.contains("embedding")) c.embedding = backend("embedding", c.embedding);
    if (j.contains("judge")) c.judge = backend("judge", c.chat);
    if (j.contains("pipeline")) c.pipeline = pipeline::config_from_json(j.at("pipeline"), c.pipeline);
    if (c.parallelism == 0) {
        throw ConfigError(path.string() + ": parallelism must be at least 1");
    }
    return c;
}

CliConfig resolve_config(const GlobalFlags& flags) {
    CliConfig c = flags.config_path.empty() ? CliConfig{} : load_cli_config(flags.config_path);
    if (!flags.data_root.empty()) {
        c.data_root = flags.data_root;
    }
    auto apply = [&](llm::BackendConfig& b) {
        if (!flags.backend_url.empty()) {
            b.kind = llm::BackendKind::http_chat;
            b.endpoint_url = flags.backend_url;
        }
        if (!flags.script.empty()) {
            b.kind = llm::BackendKind::scripted;
            b.script_path = flags.script;
            b.script.clear();
        }
        if (!flags.model.empty()) {
            b.model_name = flags.model;
        }
    };
    apply(c.chat);
    if (c.judge) {
        apply(*c.judge);
    }
    return c;
}

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Role-playing agents built from the text of a book.", "rolekit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Print help for every command");
    app.get_formatter()->column_width(34);

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--data-root", flags.data_root, "Directory holding books, personas, sessions and traces");
    app.add_option("--backend-url", flags.backend_url, "Chat-completions endpoint, e.g. http://127.0.0.1:8000/v1");
    app.add_option("--model", flags.model, "Model name sent to the chat backend");
    app.add_option("--script", flags.script, "Replay a scripted chat backend from a JSON rule table")
        ->check(CLI::ExistingFile);

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Chunk a book and extract its dialogue");
    ingest->add_option("book", ingest_args.book_path, "Plain-text book file")->required();
    ingest->add_option("--book-id", ingest_args.book_id, "Identifier for the book (default: file stem)");
    ingest->add_option("--aliases", ingest_args.aliases, "JSON file mapping canonical names to aliases");
    ingest->add_option("--chunk-size", ingest_args.chunk_size, "Tokens per chunk")->capture_default_str();
    ingest->add_option("--overlap", ingest_args.overlap, "Tokens shared by adjacent chunks")->capture_default_str();

    ExtractArgs extract_args;
    auto* extract = app.add_subcommand("extract", "Build a persona profile and the book's memory graph");
    extract->add_option("character", extract_args.character, "Canonical speaker name")->required();
    extract->add_option("--book", extract_args.book_id, "Book identifier (default: the only ingested book)");
    extract->add_flag("--skip-memory", extract_args.skip_memory, "Do not build the memory graph");
    extract->add_flag("--rebuild-memory", extract_args.rebuild_memory, "Rebuild an existing memory graph");
    extract->add_option("--relevant-chunks", extract_args.relevant_chunks, "Chunks read for personality and background")
        ->capture_default_str();
    extract->add_option("--style-sample", extract_args.style_sample, "Utterances sampled for style analysis")
        ->capture_default_str();

    ChatArgs chat_args;
    auto* chat = app.add_subcommand("chat", "Talk to a persona in the terminal");
    chat->add_option("character", chat_args.character, "Persona name")->required();
    chat->add_option("--session", chat_args.session, "Resume an existing session");

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--host", serve_args.host, "Listen address")->capture_default_str();
    serve->add_option("--port", serve_args.port, "Listen port (0 picks a free one)")->capture_default_str();
    serve->add_option("--max-queued", serve_args.max_queued, "Turns allowed to wait per session")
        ->capture_default_str();

    JudgeArgs judge_args;
    auto* judge_cmd = app.add_subcommand("judge", "Score dialogue samples pairwise with a judge model");
    judge_cmd->add_option("--samples", judge_args.samples, "Directory of JSON dialogue sample arrays")->required();
    judge_cmd->add_option("--out", judge_args.out, "Report path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error[" << error_code_name(ErrorCode::input) << "]: " << e.what() << "\n";
        return 2;
    }

    try {
        Runtime rt(resolve_config(flags));
        if (ingest->parsed()) {
            cmd_ingest(rt, ingest_args, out);
        } else if (extract->parsed()) {
            cmd_extract(rt, extract_args, out);
        } else if (chat->parsed()) {
            cmd_chat(rt, chat_args, in, out, err);
        } else if (serve->parsed()) {
            cmd_serve(rt, serve_args, out);
        } else if (judge_cmd->parsed()) {
            cmd_judge(rt, judge_args, out);
        }
    } catch (const Error& e) {
        print_error(err, e);
        return 1;
    } catch (const std::exception& e) {
        print_error(err, InternalError(e.what()));
        return 1;
    }
    return 0;
}

} // namespace rolekit::cli
