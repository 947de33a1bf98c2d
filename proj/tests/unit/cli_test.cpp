#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rolekit/cli/cli.hpp"
#include "rolekit/error.hpp"
#include "rolekit/profile/persona.hpp"
#include "rolekit/text/tokenizer.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kCliFixtures = fs::path(ROLEKIT_FIXTURE_DIR) / "cli";

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
    args.insert(args.begin(), "rolekit");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::istringstream in(input);
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = rolekit::cli::run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("rolekit_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::vector<std::string> base_args(const fs::path& root) {
    return {"--data-root", root.string(), "--script", (kCliFixtures / "script.json").string()};
}

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

Run ingest(const fs::path& root, std::vector<std::string> extra = {}) {
    return run(with(base_args(root),
                    with({"ingest", (kCliFixtures / "harbour.txt").string(), "--chunk-size", "60", "--overlap", "10"},
                         extra)));
}

// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), dir).string()] = read(e.path());
        }
    }
    return out;
}

} // namespace

TEST(Cli, HelpSnapshot) {
    std::string all;
    for (const auto& cmd : std::vector<std::vector<std::string>>{
             {"--help"}, {"ingest", "--help"}, {"extract", "--help"}, {"chat", "--help"}, {"serve", "--help"},
             {"judge", "--help"}}) {
        const auto r = run(cmd);
        EXPECT_EQ(r.code, 0);
        all += "$ rolekit";
        for (const auto& c : cmd) {
            all += " " + c;
        }
        all += "\n" + r.out + "\n";
    }
    const auto path = fs::path(ROLEKIT_SNAPSHOT_DIR) / "cli_help.txt";
    if (std::getenv("ROLEKIT_UPDATE_SNAPSHOTS")) {
        std::ofstream(path, std::ios::binary) << all;
    }
    EXPECT_EQ(all, read(path));
    for (const char* flag : {"--config", "--data-root", "--backend-url", "--model", "--script", "--book-id",
                             "--aliases", "--chunk-size", "--overlap", "--skip-memory", "--rebuild-memory",
                             "--session", "--host", "--port", "--max-queued", "--samples", "--out"}) {
        EXPECT_NE(all.find(flag), std::string::npos) << flag;
    }
}

TEST(Cli, UsageErrorsAreSingleLine) {
    for (const auto& args : std::vector<std::vector<std::string>>{{}, {"chat"}, {"frobnicate"}, {"--port", "1"}}) {
        const auto r = run(args);
        EXPECT_EQ(r.code, 2);
        EXPECT_EQ(r.err.rfind("error[E_INPUT]: ", 0), 0u) << r.err;
        EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
    }
}

TEST(Cli, MissingBackendIsConfigError) {
    const auto root = fresh("nobackend");
    const auto r = run({"--data-root", root.string(), "ingest", (kCliFixtures / "harbour.txt").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error[E_CONFIG]: no chat backend", 0), 0u) << r.err;
}

TEST(Cli, IngestChunkCountMatchesWindowArithmetic) {
    const auto root = fresh("ingest");
    const auto r = ingest(root);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto n = rolekit::text::default_tokenizer().tokenize(read(kCliFixtures / "harbour.txt")).size();
    const std::size_t size = 60;
    const std::size_t stride = 50;
    const std::size_t expected = n <= size ? 1 : 1 + (n - size + stride - 1) / stride;
    EXPECT_NE(r.out.find("book harbour: " + std::to_string(expected) + " chunks"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(root / "books" / "harbour" / "utterances.jsonl"));
    EXPECT_NE(r.out.find("  Tomas\t"), std::string::npos);
    EXPECT_NE(r.out.find("  Mira\t"), std::string::npos);
}

TEST(Cli, IngestMissingFileAndAliases) {
    const auto root = fresh("aliases");
    auto r = run(with(base_args(root), {"ingest", "/no/such/book.txt"}));
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err, "error[E_INPUT]: cannot read /no/such/book.txt\n");

    const auto aliases = root.string() + "-aliases.json";
    std::ofstream(aliases) << R"({"Tomas": ["Tomas", "Mira"]})";
    r = ingest(root, {"--aliases", aliases});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("  Tomas\t"), std::string::npos);
    EXPECT_EQ(r.out.find("  Mira\t"), std::string::npos) << r.out;
    fs::remove(aliases);
}

TEST(Cli, ExtractWritesLoadableBundleAndIsReproducible) {
    std::vector<std::map<std::string, std::string>> trees;
    for (const char* name : {"extract_a", "extract_b"}) {
        const auto root = fresh(name);
        ASSERT_EQ(ingest(root).code, 0);
        const auto r = run(with(base_args(root), {"extract", "Tomas"}));
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_NE(r.out.find("memory graph harbour: 3 entities, 1 relations"), std::string::npos) << r.out;
        const auto bundle = rolekit::profile::load_bundle(root / "personas" / "Tomas");
        EXPECT_EQ(bundle.canonical_name, "Tomas");
        EXPECT_EQ(bundle.background.get("occupation"), "Lighthouse keeper");
        auto files = tree(root / "personas");
        for (auto& [k, v] : tree(root / "books")) {
            files["books/" + k] = v;
        }
        trees.push_back(std::move(files));
    }
    EXPECT_FALSE(trees[0].empty());
    EXPECT_EQ(trees[0], trees[1]);
}

TEST(Cli, ExtractUnknownCharacterListsSpeakers) {
    const auto root = fresh("unknown");
    ASSERT_EQ(ingest(root).code, 0);
    const auto r = run(with(base_args(root), {"extract", "Nobody"}));
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err, "error[E_NOT_FOUND]: no utterances for 'Nobody'; known speakers: Tomas, Mira\n");
}

TEST(Cli, ChatReplTraceAndConfig) {
    const auto root = fresh("chat");
    ASSERT_EQ(ingest(root).code, 0);
    ASSERT_EQ(run(with(base_args(root), {"extract", "Tomas"})).code, 0);
    const auto r = run(with(base_args(root), {"chat", "Tomas"}),
                       "Is the light lit?\n/trace\n/config memory_check_enabled off\nIs the light lit?\n/trace\n"
                       "/config bogus 1\n/quit\n");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("Tomas: Thirty years the light's been kept. Glad you came, lass.\n"), std::string::npos)
        << r.out;
    EXPECT_NE(r.out.find("Tomas: Aye, the light is kept. Glad you came, lass.\n"), std::string::npos) << r.out;

    // Each /trace dump is a JSON object starting at a line with "{".
    std::vector<nlohmann::json> traces;
    for (std::size_t pos = r.out.find("> {\n"); pos != std::string::npos; pos = r.out.find("> {\n", pos + 1)) {
        const auto end = r.out.find("\n}\n", pos);
        traces.push_back(nlohmann::json::parse(r.out.substr(pos + 2, end + 2 - pos - 2)));
    }
    ASSERT_EQ(traces.size(), 2u);
    EXPECT_EQ(traces[0].at("stages").dump(), R"(["styleless","rewrite_query","memory_check","stylize"])");
    EXPECT_EQ(traces[1].at("stages").dump(), R"(["styleless","stylize"])");
    EXPECT_TRUE(traces[1].at("memory_checked").is_null());
    EXPECT_TRUE(traces[1].at("rewrite_keywords").is_null());
    EXPECT_NE(r.err.find("error[E_CONFIG]: unknown pipeline config key 'bogus'"), std::string::npos) << r.err;
}

TEST(Cli, ServePortConflictIsStartupError) {
    const auto root = fresh("serve");
    httplib::Server blocker;
    const int port = blocker.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    const auto r = run(with(base_args(root), {"serve", "--port", std::to_string(port)}));
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error[E_CONFIG]: cannot bind 127.0.0.1:" + std::to_string(port), 0), 0u) << r.err;
}

TEST(Cli, JudgeWritesReport) {
    const auto root = fresh("judge");
    fs::create_directories(root);
    const auto report = root / "report.json";
    const auto r = run(with(base_args(root), {"judge", "--samples", (kCliFixtures / "samples").string(), "--out",
                                              report.string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(read(report));
    EXPECT_EQ(j.at("pairs_judged"), 1);
    EXPECT_EQ(j.at("overall").at(0).at("method"), "ours");
    EXPECT_DOUBLE_EQ(j.at("overall").at(0).at("cp").get<double>(), 7.0);
    EXPECT_DOUBLE_EQ(j.at("overall").at(1).at("cp").get<double>(), 7.0);
    EXPECT_EQ(run(with(base_args(root), {"judge", "--samples", (root / "none").string()})).code, 1);
}

TEST(Cli, ConfigFileWithFlagOverrides) {
    const auto dir = fresh("config");
    fs::create_directories(dir);
    std::ofstream(dir / "rolekit.json") << R"({
      "data_root": "from-config",
      "parallelism": 2,
      "chat": {"kind": "scripted", "script_path": "script.json"},
      "judge": {"model": "judge-model"},
      "pipeline": {"matching_mode": "simple"}
    })";
    fs::copy_file(kCliFixtures / "script.json", dir / "script.json");
    auto c = rolekit::cli::load_cli_config(dir / "rolekit.json");
    EXPECT_EQ(c.data_root, dir / "from-config");
    EXPECT_EQ(c.chat.script_path, (dir / "script.json").string());
    EXPECT_EQ(c.parallelism, 2u);
    ASSERT_TRUE(c.judge);
    EXPECT_EQ(c.judge->model_name, "judge-model");
    EXPECT_EQ(c.judge->script_path, (dir / "script.json").string());
    EXPECT_EQ(c.pipeline.matching_mode, rolekit::pipeline::MatchingMode::simple);

    rolekit::cli::GlobalFlags flags;
    flags.config_path = (dir / "rolekit.json").string();
    flags.data_root = "elsewhere";
    flags.backend_url = "http://127.0.0.1:9/v1";
    flags.model = "m";
    c = rolekit::cli::resolve_config(flags);
    EXPECT_EQ(c.data_root, "elsewhere");
    EXPECT_EQ(c.chat.kind, rolekit::llm::BackendKind::http_chat);
    EXPECT_EQ(c.chat.endpoint_url, "http://127.0.0.1:9/v1");
    EXPECT_EQ(c.judge->model_name, "m");

    std::ofstream(dir / "bad.json") << R"({"data_root": "x", "colour": "blue"})";
    EXPECT_THROW(rolekit::cli::load_cli_config(dir / "bad.json"), rolekit::ConfigError);
    const auto r = run({"--config", (dir / "bad.json").string(), "judge", "--samples", "x"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err, "error[E_CONFIG]: " + (dir / "bad.json").string() + ": unknown key 'colour'\n");
}
