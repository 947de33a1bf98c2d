#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rolekit/error.hpp"
#include "rolekit/memory/memory_graph.hpp"
#include "support/oracles.hpp"
#include "support/scripted.hpp"

using namespace rolekit;
using namespace rolekit::memory;
using testutil::sub;

namespace {

std::shared_ptr<const llm::Embedder> hash_embedder() {
    return std::make_shared<llm::Embedder>(std::make_shared<llm::HashEmbeddingModel>(64));
}

ingest::Chunk chunk(std::size_t id, std::string text) {
    return {id, std::move(text), {id * 10, id * 10 + 5}, "book"};
}

std::string read(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const prompts::PromptLibrary& library() {
    static const auto lib = prompts::PromptLibrary::builtin();
    return lib;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("rolekit_memory_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

const char* kHarryPotions =
    R"({"entities": [{"name": "Harry", "description": "A young wizard."},
                     {"name": "Snape", "description": "The potions master."}],
        "relations": [{"source": "Harry", "target": "Snape", "label": "studies under",
                       "description": "Harry attends potions class."}]})";

} // namespace

TEST(GraphReply, ParsesAndDropsNamelessEntries) {
    const auto g = parse_graph_reply(R"(```json
{"entities": [{"name": " Hagrid ", "description": "Keeper of keys"}, {"name": "", "description": "x"}],
 "relations": [{"source": "Hagrid", "target": "Fang", "label": ""}, {"source": "", "target": "Fang"}]}
```)");
    ASSERT_EQ(g.entities.size(), 1u);
    EXPECT_EQ(g.entities[0].name, "Hagrid");
    ASSERT_EQ(g.relations.size(), 1u);
    EXPECT_EQ(g.relations[0].label, "related_to");
    EXPECT_THROW(parse_graph_reply(R"({"relations": []})"), ParseError);
    EXPECT_THROW(parse_graph_reply(R"({"entities": [{"name": 3}]})"), ParseError);
}

TEST(DocIds, KindRoundTrip) {
    for (auto kind : {HitKind::entity, HitKind::relation, HitKind::chunk}) {
        const auto id = doc_id_for(kind, 12345);
        EXPECT_EQ(kind_of(id), kind);
        EXPECT_EQ(local_id_of(id), 12345u);
    }
    EXPECT_NE(doc_id_for(HitKind::entity, 0), doc_id_for(HitKind::chunk, 0));
}

TEST(MemoryGraphBuild, MergesNamesAcrossChunksAndSummarizes) {
    auto client = testutil::scripted_client({
        sub("first scene", kHarryPotions),
        sub("second scene", R"({"entities": [{"name": "HARRY", "description": "The boy who lived."},
                                             {"name": "Hedwig", "description": "An owl."}],
                                "relations": [{"source": "harry", "target": "Hedwig", "label": "owns"},
                                              {"source": "Harry", "target": "Snape", "label": "Studies Under"}]})"),
        sub("[task:entity_summary]", "A young wizard known as the boy who lived."),
    });
    const auto graph = MemoryGraph::build("book", {chunk(0, "first scene"), chunk(1, "second scene")}, *client,
                                          library(), hash_embedder());
    ASSERT_EQ(graph.entities().size(), 3u);
    EXPECT_EQ(graph.entities()[0].name, "Harry");
    EXPECT_EQ(graph.entities()[0].description, "A young wizard known as the boy who lived.");
    EXPECT_EQ(graph.entities()[0].source_chunk_ids, (std::set<std::size_t>{0, 1}));
    EXPECT_EQ(graph.entities()[1].description, "The potions master.");
    ASSERT_EQ(graph.relations().size(), 2u);
    EXPECT_EQ(graph.relations()[0].source_chunk_ids, (std::set<std::size_t>{0, 1}));
    EXPECT_EQ(graph.relations()[1].label, "owns");
    const auto seq = testutil::tasks(*client->log());
    EXPECT_EQ(std::count(seq.begin(), seq.end(), "entity_summary"), 1);
    EXPECT_EQ(std::count(seq.begin(), seq.end(), "graph_extract"), 2);
    EXPECT_EQ(graph.index().size(), 3u + 2u + 2u);
}

TEST(MemoryGraphBuild, MissingEndpointIsCreated) {
    auto client = testutil::scripted_client({
        sub("only scene", R"({"entities": [{"name": "Ron"}],
                              "relations": [{"source": "Ron", "target": "Scabbers", "label": "keeps"}]})"),
    });
    const auto graph = MemoryGraph::build("b", {chunk(0, "only scene")}, *client, library(), hash_embedder());
    ASSERT_EQ(graph.entities().size(), 2u);
    EXPECT_EQ(graph.entities()[1].name, "Scabbers");
    EXPECT_EQ(MemoryGraph::entity_text(graph.entities()[0]), "Ron");
    EXPECT_EQ(graph.relation_text(graph.relations()[0]), "keeps");
}

TEST(MemoryGraphBuild, FailedChunkIsSkippedWithWarning) {
    auto client = testutil::scripted_client({
        sub("good scene", kHarryPotions),
        sub("bad scene", "no json here"),
        sub("[task:graph_extract.repair]", "still no json"),
    });
    const auto graph = MemoryGraph::build("b", {chunk(0, "good scene"), chunk(1, "bad scene")}, *client,
                                          library(), hash_embedder());
    EXPECT_EQ(graph.entities().size(), 2u);
    ASSERT_EQ(graph.warnings().size(), 1u);
    EXPECT_NE(graph.warnings()[0].find("chunk 1"), std::string::npos);
    EXPECT_EQ(graph.chunks().size(), 2u);
}

TEST(MemoryGraphBuild, TotalFailureThrowsExtractionError) {
    auto client = testutil::scripted_client({sub("[task:graph_extract", "nonsense")});
    EXPECT_THROW(MemoryGraph::build("b", {chunk(0, "a"), chunk(1, "b")}, *client, library(), hash_embedder()),
                 ExtractionError);
    auto empty = testutil::scripted_client({sub("[task:graph_extract]", R"({"entities": []})")});
    EXPECT_THROW(MemoryGraph::build("b", {chunk(0, "a")}, *empty, library(), hash_embedder()), ExtractionError);
    EXPECT_THROW(MemoryGraph::build("b", {}, *empty, library(), hash_embedder()), InputError);
}

TEST(MemoryGraphBuild, FiveChunkCounts) {
    std::vector<ingest::Chunk> chunks;
    std::vector<llm::ScriptedRule> rules;
    for (std::size_t i = 0; i < 5; ++i) {
        const auto marker = "scene number " + std::to_string(i);
        chunks.push_back(chunk(i, marker));
        rules.push_back(sub(marker, R"({"entities": [{"name": "Person)" + std::to_string(i) +
                                        R"(", "description": "d"}, {"name": "Castle", "description": "Old castle."}],
                                        "relations": [{"source": "Person)" + std::to_string(i) +
                                        R"(", "target": "Castle", "label": "lives in"}]})"));
    }
    auto client = testutil::scripted_client(rules);
    const auto graph = MemoryGraph::build("b", chunks, *client, library(), hash_embedder());
    EXPECT_EQ(graph.entities().size(), 6u);
    EXPECT_EQ(graph.relations().size(), 5u);
    EXPECT_EQ(graph.entities()[1].name, "Castle");
    EXPECT_EQ(graph.entities()[1].source_chunk_ids.size(), 5u);
    EXPECT_EQ(graph.entities()[1].description, "Old castle.");
    EXPECT_EQ(testutil::tasks(*client->log()).size(), 5u);
}

class MemoryQuery : public ::testing::Test {
protected:
    void SetUp() override {
        auto client = testutil::scripted_client({
            sub("potions lesson", kHarryPotions),
            sub("owl post", R"({"entities": [{"name": "Hedwig", "description": "A snowy owl carrying letters."}],
                                "relations": [{"source": "Harry", "target": "Hedwig", "label": "owns"}]})"),
            sub("[task:entity_summary]", "A young wizard."),
        });
        graph_ = std::make_unique<MemoryGraph>(MemoryGraph::build(
            "b", {chunk(0, "A potions lesson in the dungeon."), chunk(1, "The owl post arrived at breakfast.")},
            *client, library(), hash_embedder()));
    }

    std::unique_ptr<MemoryGraph> graph_;
};

TEST_F(MemoryQuery, ExactEntityNameIsTopHit) {
    const auto hits = graph_->query({"Hedwig"}, {3, 0, 0.8});
    ASSERT_FALSE(hits.empty());
    EXPECT_EQ(hits[0].kind, HitKind::entity);
    EXPECT_EQ(hits[0].text, "Hedwig: A snowy owl carrying letters.");
    EXPECT_EQ(hits[0].provenance, (std::vector<std::size_t>{1}));
    EXPECT_FALSE(hits[0].expanded);
}

TEST_F(MemoryQuery, KOneReturnsSingleNode) {
    const auto hits = graph_->query({"Snape", "potions"}, {1, 1, 0.8});
    ASSERT_EQ(hits.size(), 1u);
}

TEST_F(MemoryQuery, ExpansionMatchesOracle) {
    const std::size_t k = 2;
    const double w = 0.8;
    const auto direct = graph_->direct_scores({"Hedwig"});
    std::map<std::uint64_t, double> expected;
    for (const auto& d : direct) {
        expected[d.doc_id] = d.fused_score;
    }
    std::map<std::uint64_t, double> boosted = expected;
    for (std::size_t i = 0; i < k; ++i) {
        const auto seed = direct[i].doc_id;
        const auto local = local_id_of(seed);
        std::vector<std::uint64_t> nb;
        if (kind_of(seed) == HitKind::entity) {
            for (const auto& r : graph_->relations()) {
                if (r.src == local || r.dst == local) {
                    nb.push_back(doc_id_for(HitKind::relation, r.relation_id));
                }
            }
        } else if (kind_of(seed) == HitKind::relation) {
            nb.push_back(doc_id_for(HitKind::entity, graph_->relations()[local].src));
            nb.push_back(doc_id_for(HitKind::entity, graph_->relations()[local].dst));
        }
        for (auto n : nb) {
            boosted[n] = std::max(boosted[n], w * direct[i].fused_score);
        }
    }
    std::vector<std::pair<std::uint64_t, double>> ranked(boosted.begin(), boosted.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    const auto hits = graph_->query({"Hedwig"}, {k, 1, w});
    ASSERT_EQ(hits.size(), k);
    for (std::size_t i = 0; i < k; ++i) {
        EXPECT_EQ(hits[i].doc_id, ranked[i].first);
        EXPECT_NEAR(hits[i].score, ranked[i].second, 1e-12);
        EXPECT_EQ(hits[i].expanded, ranked[i].second > expected[ranked[i].first]);
    }
    const auto wide = graph_->query({"Hedwig"}, {7, 1, w});
    bool saw_harry = false;
    for (const auto& h : wide) {
        saw_harry = saw_harry || (h.kind == HitKind::entity && h.text.rfind("Harry", 0) == 0);
    }
    EXPECT_TRUE(saw_harry);
}

TEST_F(MemoryQuery, RejectsBadInput) {
    EXPECT_THROW(graph_->query({}, {}), InputError);
    EXPECT_THROW(graph_->query({"  "}, {}), InputError);
    EXPECT_THROW(graph_->query({"Harry"}, {0, 1, 0.8}), InputError);
}

TEST_F(MemoryQuery, SaveLoadRoundTripIsStable) {
    const auto dir = temp_dir("roundtrip");
    graph_->save(dir);
    const auto loaded = MemoryGraph::load(dir, hash_embedder());
    EXPECT_EQ(loaded.entities(), graph_->entities());
    EXPECT_EQ(loaded.relations(), graph_->relations());
    EXPECT_EQ(loaded.chunks(), graph_->chunks());
    const auto a = graph_->query({"owl", "Harry"}, {});
    const auto b = loaded.query({"owl", "Harry"}, {});
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].doc_id, b[i].doc_id);
        EXPECT_NEAR(a[i].score, b[i].score, 1e-12);
    }
    const auto again = temp_dir("roundtrip2");
    loaded.save(again);
    for (const char* f : {"manifest.json", "entities.jsonl", "relations.jsonl", "chunks.jsonl"}) {
        EXPECT_EQ(read(dir / f), read(again / f)) << f;
    }
}

TEST_F(MemoryQuery, LoadRejectsVersionMismatchAndMissingFiles) {
    const auto dir = temp_dir("version");
    graph_->save(dir);
    auto manifest = nlohmann::json::parse(read(dir / "manifest.json"));
    manifest["format_version"] = 99;
    std::ofstream(dir / "manifest.json") << manifest.dump();
    EXPECT_THROW(MemoryGraph::load(dir, hash_embedder()), LoadError);
    EXPECT_THROW(MemoryGraph::load(temp_dir("absent"), hash_embedder()), LoadError);
}
