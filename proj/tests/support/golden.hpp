#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolekit/llm/client.hpp"
#include "rolekit/llm/models.hpp"
#include "rolekit/memory/memory_graph.hpp"
#include "rolekit/pipeline/pipeline.hpp"
#include "rolekit/profile/persona.hpp"
#include "rolekit/retrieval/hybrid_index.hpp"

namespace testutil {

// Replay of the two-turn Dumbledore exchange stored in
// fixtures/dumbledore_golden.json.
struct Golden {
    nlohmann::json data;

    static Golden load(const std::string& fixture_dir) {
        std::ifstream in(fixture_dir + "/dumbledore_golden.json");
        return {nlohmann::json::parse(in)};
    }

    const nlohmann::json& turn(std::size_t i) const { return data.at("turns").at(i); }

    std::shared_ptr<const rolekit::profile::PersonaBundle> bundle() const {
        const auto& p = data.at("persona");
        auto b = std::make_shared<rolekit::profile::PersonaBundle>();
        b->canonical_name = p.at("canonical_name");
        b->source_book = "hp";
        b->personality.synthesized = p.at("personality");
        for (const auto& [k, v] : p.at("background").items()) {
            b->background.set(k, v.get<std::string>());
        }
        b->style.preferences = p.at("style_preferences");
        b->style.common_words = {{"adjective", {{"dear", 4}}}, {"pronoun", {{"my", 4}, {"you", 3}}}};
        std::size_t ordinal = 0;
        for (const auto& u : p.at("utterances")) {
            b->utterances.push_back({b->canonical_name, u.get<std::string>(), 0, ordinal++});
        }
        b->alias_map = {{b->canonical_name, {b->canonical_name, "Dumbledore"}}};
        return b;
    }

    std::vector<rolekit::ingest::Chunk> chunks() const {
        std::vector<rolekit::ingest::Chunk> out;
        std::size_t id = 0;
        for (const auto& c : data.at("memory").at("chunks")) {
            out.push_back({id, c.get<std::string>(), {id * 40, id * 40 + 30}, "hp"});
            ++id;
        }
        return out;
    }

    std::vector<rolekit::llm::ScriptedRule> graph_script() const {
        std::vector<rolekit::llm::ScriptedRule> rules;
        const auto& m = data.at("memory");
        for (std::size_t i = 0; i < m.at("chunks").size(); ++i) {
            rules.push_back({m.at("chunks")[i].get<std::string>(), rolekit::llm::MatchKind::substring,
                             m.at("graph_replies")[i].dump(), std::nullopt});
        }
        rules.push_back({"[task:entity_summary]", rolekit::llm::MatchKind::substring, "Merged description.",
                         std::nullopt});
        return rules;
    }

    // Script for the given turns in order. Per-turn stage replies carry a
    // budget of one so consecutive turns replay in sequence.
    std::vector<rolekit::llm::ScriptedRule> turn_script(std::size_t turns = 2) const {
        using rolekit::llm::MatchKind;
        std::vector<rolekit::llm::ScriptedRule> rules;
        for (std::size_t i = 0; i < turns; ++i) {
            const auto& t = turn(i);
            rules.push_back({"[task:styleless]", MatchKind::substring, t.at("styleless"), 1});
            rules.push_back({"[task:rewrite_query]", MatchKind::substring, t.at("keywords").dump(), 1});
            rules.push_back({"[task:memory_check]", MatchKind::substring, t.at("memory_checked"), 1});
        }
        for (std::size_t i = 0; i < turns; ++i) {
            for (const auto& r : turn(i).at("rewrites")) {
                rules.push_back({"<sentence>" + r[0].get<std::string>() + "</sentence>", MatchKind::substring,
                                 r[1].get<std::string>(), std::nullopt});
            }
        }
        return rules;
    }

    std::shared_ptr<const rolekit::llm::Embedder> embedder() const {
        return std::make_shared<rolekit::llm::Embedder>(std::make_shared<rolekit::llm::HashEmbeddingModel>(128));
    }

    // Persona bundle under personas/ and the memory graph under books/hp/graph.
    void install(const std::filesystem::path& root) const {
        const auto b = bundle();
        rolekit::profile::save_bundle(*b, root / "personas" / "Albus_Dumbledore");
        rolekit::llm::LlmClient graph_client(std::make_shared<rolekit::llm::ScriptedChatModel>(graph_script()));
        rolekit::memory::MemoryGraph::build("hp", chunks(), graph_client, rolekit::prompts::PromptLibrary::builtin(),
                                            embedder())
            .save(root / "books" / "hp" / "graph");
    }

    rolekit::pipeline::PersonaContext context() const {
        rolekit::pipeline::PersonaContext ctx;
        ctx.bundle = bundle();
        rolekit::llm::LlmClient graph_client(std::make_shared<rolekit::llm::ScriptedChatModel>(graph_script()));
        ctx.graph = std::make_shared<const rolekit::memory::MemoryGraph>(rolekit::memory::MemoryGraph::build(
            "hp", chunks(), graph_client, rolekit::prompts::PromptLibrary::builtin(), embedder()));
        std::vector<rolekit::retrieval::Document> docs;
        for (std::size_t i = 0; i < ctx.bundle->utterances.size(); ++i) {
            docs.push_back({i, ctx.bundle->utterances[i].text});
        }
        ctx.utterance_index = std::make_shared<const rolekit::retrieval::HybridIndex>(
            rolekit::retrieval::HybridIndex::build(docs, embedder()));
        return ctx;
    }
};

} // namespace testutil
