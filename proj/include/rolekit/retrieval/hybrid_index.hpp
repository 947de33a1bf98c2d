#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolekit/llm/client.hpp"
#include "rolekit/text/tokenizer.hpp"

namespace rolekit::retrieval {

struct Document {
    std::uint64_t id = 0;
    std::string text;
};

struct FusionWeights {
    double lexical = 0.5;
    double dense = 0.5;

    /// Both non-negative and summing to 1 (within 1e-9), else ConfigError.
    void validate() const;
};

struct ScoredDoc {
    std::uint64_t doc_id = 0;
    double fused_score = 0.0;
    double lex_score_raw = 0.0;
    double dense_score_raw = 0.0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Smallest candidate pool each score family contributes to fusion.
inline constexpr std::size_t kMinFusionPool = 100;

/// Okapi BM25 over term lists. idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).
class Bm25Index {
public:
    Bm25Index() = default;
    Bm25Index(const std::vector<std::vector<std::string>>& docs, Bm25Params params = {});

    /// One raw score per document; repeated query terms count once.
    std::vector<double> score(const std::vector<std::string>& query_terms) const;

    std::size_t size() const noexcept { return doc_lengths_.size(); }
    double average_length() const noexcept { return avgdl_; }
    const std::vector<std::size_t>& doc_lengths() const noexcept { return doc_lengths_; }
    std::size_t document_frequency(const std::string& term) const;
    const Bm25Params& params() const noexcept { return params_; }

    nlohmann::json to_json() const;
    static Bm25Index from_json(const nlohmann::json& j);

private:
    struct Posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };

    void finish();

    Bm25Params params_;
    std::vector<std::size_t> doc_lengths_;
    std::vector<std::map<std::string, std::uint32_t>> term_counts_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avgdl_ = 0.0;
};

/// Weighted min-max fusion of two score families. The candidate pool is
/// the union of each family's top `pool_depth` entries (ties by id); each
/// family is rescaled to [0,1] over the pool, a flat family scoring 1.0.
/// `ids`, `lexical` and `dense` are parallel. Sorted by fused score
/// descending, then id ascending.
std::vector<ScoredDoc> fuse(const std::vector<std::uint64_t>& ids, const std::vector<double>& lexical,
                            const std::vector<double>& dense, const FusionWeights& weights,
                            std::size_t pool_depth = kMinFusionPool);

/// Paired BM25 and embedding index over a fixed document set. Immutable
/// after construction; searches may run concurrently.
class HybridIndex {
public:
    /// Throws InputError on an empty document set or duplicate ids. Blank
    /// documents get zero-length statistics and a zero embedding.
    static HybridIndex build(std::vector<Document> docs, std::shared_ptr<const llm::Embedder> embedder,
                             FusionWeights weights = {}, Bm25Params params = {});

    /// Top `k` documents for `query`. Throws InputError when the query has
    /// no lexical terms or k is 0.
    std::vector<ScoredDoc> search(const std::string& query, std::size_t k) const;

    /// Mean of the fused scores from search(prefix + " " + segment) and
    /// search(segment); a document absent from one list contributes 0
    /// there. A blank prefix gives exactly search(segment, k).
    std::vector<ScoredDoc> search_progressive(const std::string& matched_prefix, const std::string& new_segment,
                                              std::size_t k) const;

    std::vector<double> lexical_scores(const std::string& query) const;
    std::vector<double> dense_scores(const std::string& query) const;

    std::size_t size() const noexcept { return docs_.size(); }
    const std::vector<Document>& documents() const noexcept { return docs_; }
    const Document& document(std::uint64_t id) const;
    const FusionWeights& weights() const noexcept { return weights_; }
    const Bm25Index& lexical() const noexcept { return bm25_; }
    const std::vector<llm::EmbeddingVector>& embeddings() const noexcept { return embeddings_; }

    HybridIndex with_weights(FusionWeights weights) const;

    /// Writes <dir>/lexical.json and <dir>/embeddings.bin.
    void save(const std::filesystem::path& dir) const;
    static HybridIndex load(const std::filesystem::path& dir, std::shared_ptr<const llm::Embedder> embedder);

private:
    HybridIndex() = default;

    std::vector<std::string> query_terms(const std::string& query) const;

    std::vector<Document> docs_;
    std::unordered_map<std::uint64_t, std::size_t> position_;
    Bm25Index bm25_;
    std::vector<llm::EmbeddingVector> embeddings_;
    std::vector<double> norms_;
    FusionWeights weights_;
    std::shared_ptr<const llm::Embedder> embedder_;
};

/// Embedding matrix file: uint64 rows, uint64 dimension, then row-major
/// little-endian doubles.
void write_embeddings(const std::filesystem::path& path, const std::vector<llm::EmbeddingVector>& rows);
std::vector<llm::EmbeddingVector> read_embeddings(const std::filesystem::path& path);

} // namespace rolekit::retrieval
