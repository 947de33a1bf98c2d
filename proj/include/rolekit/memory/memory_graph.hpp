#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolekit/ingest/corpus.hpp"
#include "rolekit/llm/client.hpp"
#include "rolekit/prompts/prompt_library.hpp"
#include "rolekit/retrieval/hybrid_index.hpp"

namespace rolekit::memory {

inline constexpr int kGraphFormatVersion = 1;

struct EntityNode {
    std::size_t entity_id = 0;
    std::string name;
    std::string description;
    std::set<std::size_t> source_chunk_ids;

    friend bool operator==(const EntityNode&, const EntityNode&) = default;
};

struct RelationEdge {
    std::size_t relation_id = 0;
    std::size_t src = 0;
    std::size_t dst = 0;
    std::string label;
    std::string description;
    std::set<std::size_t> source_chunk_ids;

    friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
};

enum class HitKind { entity, relation, chunk };

std::string_view hit_kind_name(HitKind kind) noexcept;

struct MemoryHit {
    HitKind kind = HitKind::chunk;
    std::uint64_t doc_id = 0;
    std::string text;
    double score = 0.0;
    std::vector<std::size_t> provenance; // chunk ids, ascending
    std::size_t first_chunk = 0;         // min(provenance), for chronological ordering
    bool expanded = false;               // reached through a graph neighbour
};

struct GraphBuildOptions {
    std::size_t parallelism = 1;
    /// Entities with at least this many distinct descriptions get an
    /// entity_summary call; fewer are kept verbatim.
    std::size_t summarize_min_descriptions = 2;
    retrieval::FusionWeights weights;
};

struct QueryOptions {
    std::size_t k = 8;
    std::size_t depth = 1;
    double expansion_weight = 0.8;
};

/// Index document ids: the kind in the top 16 bits, the entity id,
/// relation id or chunk id below.
std::uint64_t doc_id_for(HitKind kind, std::uint64_t local_id) noexcept;
HitKind kind_of(std::uint64_t doc_id) noexcept;
std::uint64_t local_id_of(std::uint64_t doc_id) noexcept;

class MemoryGraph {
public:
    /// Per-chunk graph_extract calls (one repair each). Chunks whose
    /// extraction fails are skipped with a warning; throws ExtractionError
    /// when no entity was extracted at all, InputError on no chunks.
    static MemoryGraph build(const std::string& book_id, const std::vector<ingest::Chunk>& chunks,
                             const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                             std::shared_ptr<const llm::Embedder> embedder, const GraphBuildOptions& options = {});

    /// Direct hybrid score for every entity, relation and chunk against the
    /// joined keywords; the top k seed a neighbourhood expansion where a
    /// neighbour's score becomes max(direct, expansion_weight * seed score).
    /// Throws InputError on empty keywords or k = 0.
    std::vector<MemoryHit> query(const std::vector<std::string>& keywords, const QueryOptions& options = {}) const;

    /// Entity, relation and chunk texts scored by direct fusion only.
    std::vector<retrieval::ScoredDoc> direct_scores(const std::vector<std::string>& keywords) const;

    const std::string& book_id() const noexcept { return book_id_; }
    const std::vector<EntityNode>& entities() const noexcept { return entities_; }
    const std::vector<RelationEdge>& relations() const noexcept { return relations_; }
    const std::vector<ingest::Chunk>& chunks() const noexcept { return chunks_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    const retrieval::HybridIndex& index() const noexcept { return *index_; }

    /// Text stored in the index for each node kind. Relation documents hold
    /// the label and description only; their endpoints are reached through
    /// expansion.
    static std::string entity_text(const EntityNode& e);
    std::string relation_text(const RelationEdge& r) const;

    void save(const std::filesystem::path& dir) const;
    static MemoryGraph load(const std::filesystem::path& dir, std::shared_ptr<const llm::Embedder> embedder);

private:
    MemoryGraph() = default;

    void build_index(std::shared_ptr<const llm::Embedder> embedder, const retrieval::FusionWeights& weights);
    MemoryHit make_hit(std::uint64_t doc_id, double score, bool expanded) const;

    std::string book_id_;
    std::vector<EntityNode> entities_;
    std::vector<RelationEdge> relations_;
    std::vector<ingest::Chunk> chunks_;
    std::vector<std::string> warnings_;
    std::vector<std::vector<std::size_t>> incident_; // entity -> relation ids
    std::shared_ptr<const retrieval::HybridIndex> index_;
};

struct ExtractedGraph {
    struct Entity {
        std::string name;
        std::string description;
    };
    struct Relation {
        std::string source;
        std::string target;
        std::string label;
        std::string description;
    };
    std::vector<Entity> entities;
    std::vector<Relation> relations;
};

/// Parses a graph_extract reply; throws ParseError on the wrong shape.
ExtractedGraph parse_graph_reply(const std::string& raw);

} // namespace rolekit::memory
