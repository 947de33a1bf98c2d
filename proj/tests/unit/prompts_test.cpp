#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rolekit/error.hpp"
#include "rolekit/prompts/prompt_library.hpp"

using namespace rolekit;
using namespace rolekit::prompts;

TEST(Template, PlaceholdersAndEscapes) {
    EXPECT_EQ(render_template("Hi {name}, {{literal}} {\"k\": 1}", {{"name", "Albus"}}),
              "Hi Albus, {literal} {\"k\": 1}");
    EXPECT_THROW(render_template("{missing}", {}), ConfigError);
}

TEST(Template, FileSections) {
    const auto t = parse_template_file("@@system\nline one\nline two\n@@user\n{x}\n");
    EXPECT_EQ(t.system, "line one\nline two");
    EXPECT_EQ(t.user, "{x}");
}

TEST(Library, BuiltinCoversBothLanguages) {
    const auto lib = PromptLibrary::builtin();
    const auto en = lib.names("en");
    const auto zh = lib.names("zh");
    EXPECT_EQ(en, zh);
    EXPECT_GE(en.size(), 18u);
    for (const auto* name : {"styleless_system", "rewrite_query", "memory_check", "stylize_progressive", "judge"}) {
        EXPECT_NO_THROW(lib.get(name, "en")) << name;
    }
    EXPECT_NE(lib.get("memory_check", "zh").user, lib.get("memory_check", "en").user);
    // unknown language falls back to the default set
    EXPECT_EQ(lib.get("memory_check", "fr").user, lib.get("memory_check", "en").user);
    EXPECT_THROW(lib.get("nope", "en"), ConfigError);
}

TEST(Library, RequestAndRepair) {
    const auto lib = PromptLibrary::builtin();
    const auto req = lib.request("summarize", "en", {{"draft", "a long draft"}});
    EXPECT_EQ(req.task, "summarize");
    ASSERT_EQ(req.messages.size(), 1u);
    EXPECT_NE(req.messages[0].content.find("a long draft"), std::string::npos);
    const auto fix = lib.repair_request(req, "garbage", "no JSON", "en");
    EXPECT_EQ(fix.task, "summarize.repair");
    ASSERT_EQ(fix.messages.size(), 3u);
    EXPECT_EQ(fix.messages[1].content, "garbage");
}

TEST(Library, DirectoryOverrides) {
    const auto dir = std::filesystem::temp_directory_path() / "rolekit_prompt_override";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir / "en");
    std::ofstream(dir / "en" / "summarize.txt") << "@@user\nSHORTEN: {draft}\n";
    auto lib = PromptLibrary::builtin();
    lib.load_directory(dir);
    EXPECT_EQ(lib.request("summarize", "en", {{"draft", "x"}}).messages[0].content, "SHORTEN: x");
    std::filesystem::remove_all(dir);
}
