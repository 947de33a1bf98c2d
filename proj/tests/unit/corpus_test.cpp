#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "rolekit/error.hpp"
#include "rolekit/ingest/corpus.hpp"
#include "support/oracles.hpp"
#include "support/random_text.hpp"

using namespace rolekit;
using namespace rolekit::ingest;

namespace {

std::string words(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        s += "w" + std::to_string(i) + " ";
    }
    return s;
}

UtteranceRecord rec(std::string speaker, std::size_t chunk, std::size_t ordinal) {
    return {std::move(speaker), "line " + std::to_string(chunk) + "." + std::to_string(ordinal), chunk, ordinal};
}

std::shared_ptr<llm::LlmClient> scripted(std::vector<llm::ScriptedRule> rules) {
    return std::make_shared<llm::LlmClient>(std::make_shared<llm::ScriptedChatModel>(std::move(rules)));
}

} // namespace

TEST(Chunker, EmptyDocumentAndDefaults) {
    EXPECT_TRUE(chunk_text("").empty());
    EXPECT_TRUE(chunk_text("  \n ").empty());
    EXPECT_EQ(kDefaultChunkSize, 512u);
    EXPECT_EQ(kDefaultChunkOverlap, 64u);
    EXPECT_THROW(chunk_text("a b", 64, 64), ConfigError);
    EXPECT_THROW(chunk_text("a b", 10, 20), ConfigError);
}

TEST(Chunker, ThousandTokenSpans) {
    const auto chunks = chunk_text(words(1000), 512, 64, "book");
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[0].token_span, (TokenSpan{0, 512}));
    EXPECT_EQ(chunks[1].token_span, (TokenSpan{448, 960}));
    EXPECT_EQ(chunks[2].token_span, (TokenSpan{896, 1000}));
    EXPECT_EQ(chunks[1].text.substr(0, 5), "w448 ");
    EXPECT_EQ(chunks[2].text.substr(chunks[2].text.size() - 4), "w999");
    EXPECT_EQ(chunks[2].source_doc, "book");
}

TEST(Chunker, RandomDocumentsMatchWindowOracle) {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const auto [doc, n] = testutil::random_document(rng, rng() % 3000);
        const auto chunks = chunk_text(doc, 512, 64);
        const auto expected = oracle::windows(n, 512, 64);
        ASSERT_EQ(chunks.size(), expected.size());
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            EXPECT_EQ(chunks[i].token_span.start, expected[i].first);
            EXPECT_EQ(chunks[i].token_span.end, expected[i].second);
            EXPECT_EQ(chunks[i].chunk_id, i);
        }
    }
}

TEST(Chunker, SmallWindowsCoverEveryToken) {
    const std::string doc = "你好 world 林黛玉 said hi";
    const auto chunks = chunk_text(doc, 3, 1);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (i > 0) {
            EXPECT_EQ(chunks[i - 1].token_span.end - chunks[i].token_span.start, 1u);
        }
        covered = chunks[i].token_span.end;
    }
    EXPECT_EQ(covered, 8u);
    EXPECT_EQ(chunks[0].text, "你好 world");
}

TEST(Dialogue, ParsesScriptedReply) {
    auto client = scripted({{"dialogue_extract", llm::MatchKind::substring,
                              R"([{"speaker":"Dumbledore","utterance":"Rest."},{"speaker":"Harry","utterance":"Sir?"}])",
                              std::nullopt}});
    const auto lib = prompts::PromptLibrary::builtin();
    Chunk chunk{5, "\"Rest.\" said Dumbledore. \"Sir?\" said Harry.", {0, 6}, "b"};
    const auto records = extract_dialogues(chunk, *client, lib);
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0].ordinal, 0u);
    EXPECT_EQ(records[1].ordinal, 1u);
    EXPECT_EQ(records[1].speaker, "Harry");
    EXPECT_EQ(records[0].chunk_id, 5u);
}

TEST(Dialogue, EmptyArrayYieldsNothing) {
    auto client = scripted({{"dialogue_extract", llm::MatchKind::substring, "[]", std::nullopt}});
    const auto lib = prompts::PromptLibrary::builtin();
    EXPECT_TRUE(extract_dialogues({0, "The castle was silent.", {0, 4}, ""}, *client, lib).empty());
}

TEST(Dialogue, BlankEntriesDroppedAndOrdinalsCompact) {
    const auto records =
        parse_dialogue_reply(R"([{"speaker":"","utterance":"x"},{"speaker":"A","utterance":" hi "}])", 2);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].ordinal, 0u);
    EXPECT_EQ(records[0].text, "hi");
}

TEST(Dialogue, MalformedTwiceIsExtractionError) {
    auto client = scripted({{"", llm::MatchKind::substring, "not json at all", std::nullopt}});
    const auto lib = prompts::PromptLibrary::builtin();
    try {
        extract_dialogues({0, "\"Hi,\" he said.", {0, 3}, ""}, *client, lib);
        FAIL();
    } catch (const ExtractionError& e) {
        EXPECT_EQ(e.raw_output(), "not json at all");
    }
    EXPECT_EQ(client->log()->size(), 2u);
    EXPECT_EQ(client->log()->count_task("dialogue_extract.repair"), 1u);
}

TEST(Dialogue, RepairRecovers) {
    auto client = scripted({
        {"dialogue_extract.repair", llm::MatchKind::substring, R"([{"speaker":"A","utterance":"b"}])", std::nullopt},
        {"dialogue_extract", llm::MatchKind::substring, "oops", std::nullopt},
    });
    const auto lib = prompts::PromptLibrary::builtin();
    EXPECT_EQ(extract_dialogues({0, "text", {0, 1}, ""}, *client, lib).size(), 1u);
}

TEST(Merge, CaseNormalization) {
    const auto r = merge_speakers({rec("DUMBLEDORE", 0, 0), rec("Dumbledore", 1, 0), rec("Dumbledore", 2, 0)});
    for (const auto& x : r.records) {
        EXPECT_EQ(x.speaker, "Dumbledore");
    }
    EXPECT_EQ(r.aliases.at("Dumbledore"), (std::set<std::string>{"DUMBLEDORE", "Dumbledore"}));
}

TEST(Merge, UserAliasesMergeAndWin) {
    const SpeakerAliasMap user = {{"Lin Daiyu", {"Daiyu"}}};
    const auto r = merge_speakers({rec("Daiyu", 0, 0), rec("Lin Daiyu", 0, 1), rec("Baoyu", 1, 0)}, user);
    EXPECT_EQ(r.records[0].speaker, "Lin Daiyu");
    EXPECT_EQ(r.records[1].speaker, "Lin Daiyu");
    EXPECT_EQ(r.records[2].speaker, "Baoyu");
    EXPECT_THROW(merge_speakers({}, {{"A", {"x"}}, {"B", {"X"}}}), ConfigError);
}

TEST(Merge, SingleTokenContainment) {
    const auto r = merge_speakers({rec("Albus Dumbledore", 0, 0), rec("Dumbledore", 1, 0), rec("Harry", 1, 1)});
    EXPECT_EQ(r.records[1].speaker, "Albus Dumbledore");
    EXPECT_EQ(r.records[2].speaker, "Harry");
    EXPECT_TRUE(r.ambiguous.empty());
    const auto cjk = merge_speakers({rec("林黛玉", 0, 0), rec("黛玉", 0, 1)});
    EXPECT_EQ(cjk.records[1].speaker, "林黛玉");
}

TEST(Merge, AmbiguousContainmentIsReportedNotMerged) {
    const auto r = merge_speakers({rec("Harry Potter", 0, 0), rec("James Potter", 0, 1), rec("Potter", 1, 0)});
    EXPECT_EQ(r.records[2].speaker, "Potter");
    ASSERT_EQ(r.ambiguous.size(), 1u);
    EXPECT_EQ(r.ambiguous[0].name, "Potter");
    EXPECT_EQ(r.ambiguous[0].candidates, (std::vector<std::string>{"Harry Potter", "James Potter"}));
}

TEST(Merge, CanonicalIsMostFrequentThenEarliest) {
    const auto a = merge_speakers({rec("ron", 0, 0), rec("Ron", 1, 0), rec("Ron", 2, 0)});
    EXPECT_EQ(a.records[0].speaker, "Ron");
    const auto b = merge_speakers({rec("RON", 3, 0), rec("Ron", 1, 0)});
    EXPECT_EQ(b.records[0].speaker, "Ron");
}

TEST(Merge, IdempotentAndPermutationInvariant) {
    std::vector<UtteranceRecord> records = {rec("Albus Dumbledore", 0, 0), rec("DUMBLEDORE", 0, 1),
                                            rec("dumbledore", 1, 0),       rec("Harry Potter", 1, 1),
                                            rec("Harry", 2, 0),            rec("Potter", 2, 1),
                                            rec("Minerva", 3, 0)};
    const SpeakerAliasMap user = {{"Minerva McGonagall", {"Minerva", "Professor McGonagall"}}};
    const auto once = merge_speakers(records, user);
    const auto twice = merge_speakers(once.records, once.aliases);
    EXPECT_EQ(once.records, twice.records);
    EXPECT_EQ(once.aliases, twice.aliases);
    std::mt19937 rng(3);
    for (int i = 0; i < 10; ++i) {
        std::shuffle(records.begin(), records.end(), rng);
        const auto shuffled = merge_speakers(records, user);
        EXPECT_EQ(shuffled.records, once.records);
        EXPECT_EQ(shuffled.aliases, once.aliases);
    }
    for (const auto& [canonical, set] : once.aliases) {
        EXPECT_TRUE(set.count(canonical));
    }
}

class RelevantChunks : public ::testing::Test {
protected:
    void SetUp() override {
        const std::vector<std::string> texts = {
            "The castle slept under snow.",          "Snape brewed a potion in the dungeon.",
            "Hagrid walked to the forest.",          "Dumbledore smiled at the students.",
            "The owls flew over the lake.",          "Ron ate three sandwiches at once.",
            "Albus and Minerva spoke in the office.", "Dumbledore raised his wand and said nothing.",
            "Quidditch practice was cancelled.",     "Fawkes burst into flame beside the desk.",
        };
        for (std::size_t i = 0; i < texts.size(); ++i) {
            chunks.push_back({i, texts[i], {i * 10, i * 10 + 10}, "b"});
        }
        embedder = std::make_shared<llm::Embedder>(std::make_shared<llm::HashEmbeddingModel>(64));
        index = std::make_unique<retrieval::HybridIndex>(build_chunk_index(chunks, embedder));
    }

    std::vector<Chunk> chunks;
    std::shared_ptr<llm::Embedder> embedder;
    std::unique_ptr<retrieval::HybridIndex> index;
};

TEST_F(RelevantChunks, UtteranceChunksAlwaysIncluded) {
    const std::vector<UtteranceRecord> records = {rec("Snape", 3, 0), rec("Snape", 7, 0), rec("Harry", 2, 0)};
    auto got = select_relevant_chunks("Snape", {}, records, chunks, *index, 2);
    std::vector<std::size_t> ids;
    for (const auto& c : got) {
        ids.push_back(c.chunk_id);
    }
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(ids, (std::vector<std::size_t>{3, 7}));
}

TEST_F(RelevantChunks, SaturatesAndMatchesExhaustiveRanking) {
    const SpeakerAliasMap aliases = {{"Albus Dumbledore", {"Albus Dumbledore", "Dumbledore"}}};
    EXPECT_EQ(select_relevant_chunks("Albus Dumbledore", aliases, {}, chunks, *index, 50).size(), chunks.size());

    const std::string query = "Albus Dumbledore Dumbledore";
    std::vector<std::vector<std::string>> words;
    std::vector<std::vector<double>> vecs;
    for (const auto& c : chunks) {
        words.push_back(oracle::ascii_words(c.text));
    }
    const auto lex = oracle::bm25(words, oracle::ascii_words(query));
    const auto q = oracle::hash_embedding(query, 64);
    std::map<std::uint64_t, double> lm;
    std::map<std::uint64_t, double> dm;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        lm[i] = lex[i];
        dm[i] = oracle::cosine(q, oracle::hash_embedding(chunks[i].text, 64));
    }
    const auto expected = oracle::fuse(lm, dm, 0.5, 0.5, 100);
    const auto got = select_relevant_chunks("Albus Dumbledore", aliases, {}, chunks, *index, 4);
    ASSERT_EQ(got.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(got[i].chunk_id, expected[i].first);
    }
}

TEST(Ingest, WritesAndReloadsStore) {
    const auto dir = std::filesystem::temp_directory_path() / "rolekit_ingest_rt";
    std::filesystem::remove_all(dir);
    auto client = scripted({{"dialogue_extract", llm::MatchKind::substring,
                              R"([{"speaker":"DUMBLEDORE","utterance":"Rest."},{"speaker":"Albus Dumbledore","utterance":"Sleep."}])",
                              std::nullopt}});
    IngestOptions opts;
    opts.chunk_size = 8;
    opts.overlap = 2;
    const auto lib = prompts::PromptLibrary::builtin();
    const auto store = ingest_book("hp", words(20), opts, *client, lib, dir);
    EXPECT_EQ(store.chunks.size(), 3u);
    EXPECT_EQ(client->log()->size(), 3u);
    const auto loaded = load_book(dir);
    EXPECT_EQ(loaded.chunks, store.chunks);
    EXPECT_EQ(loaded.merged.records, store.merged.records);
    EXPECT_EQ(loaded.merged.aliases, store.merged.aliases);
    for (const auto& r : loaded.merged.records) {
        EXPECT_EQ(r.speaker, "Albus Dumbledore");
    }
    std::filesystem::remove(dir / "aliases.json");
    EXPECT_THROW(load_book(dir), LoadError);
    std::filesystem::remove_all(dir);
}
