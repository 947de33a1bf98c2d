#include "rolekit/retrieval/hybrid_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "rolekit/error.hpp"
#include "rolekit/text/utf8.hpp"
#include "rolekit/util/files.hpp"

namespace rolekit::retrieval {

static_assert(std::endian::native == std::endian::little, "embedding files are written in host byte order");

void FusionWeights::validate() const {
    if (lexical < 0.0 || dense < 0.0 || std::abs(lexical + dense - 1.0) > 1e-9) {
        throw ConfigError("fusion weights must be non-negative and sum to 1 (got " + std::to_string(lexical) +
                          ", " + std::to_string(dense) + ")");
    }
}

Bm25Index::Bm25Index(const std::vector<std::vector<std::string>>& docs, Bm25Params params) : params_(params) {
    term_counts_.resize(docs.size());
    doc_lengths_.resize(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        doc_lengths_[i] = docs[i].size();
        for (const auto& term : docs[i]) {
            ++term_counts_[i][term];
        }
    }
    finish();
}

void Bm25Index::finish() {
    postings_.clear();
    double total = 0.0;
    for (std::size_t i = 0; i < term_counts_.size(); ++i) {
        total += static_cast<double>(doc_lengths_[i]);
        for (const auto& [term, tf] : term_counts_[i]) {
            postings_[term].push_back({static_cast<std::uint32_t>(i), tf});
        }
    }
    avgdl_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
}

std::size_t Bm25Index::document_frequency(const std::string& term) const {
    const auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

std::vector<double> Bm25Index::score(const std::vector<std::string>& query_terms) const {
    std::vector<double> scores(size(), 0.0);
    if (avgdl_ == 0.0) {
        return scores;
    }
    const double n = static_cast<double>(size());
    const std::set<std::string> distinct(query_terms.begin(), query_terms.end());
    for (const auto& term : distinct) {
        const auto it = postings_.find(term);
        if (it == postings_.end()) {
            continue;
        }
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const auto& p : it->second) {
            const double tf = p.tf;
            const double norm = 1.0 - params_.b + params_.b * static_cast<double>(doc_lengths_[p.doc]) / avgdl_;
            scores[p.doc] += idf * tf * (params_.k1 + 1.0) / (tf + params_.k1 * norm);
        }
    }
    return scores;
}

nlohmann::json Bm25Index::to_json() const {
    nlohmann::json df = nlohmann::json::object();
    for (const auto& [term, list] : postings_) {
        df[term] = list.size();
    }
    nlohmann::json tf = nlohmann::json::array();
    for (const auto& counts : term_counts_) {
        tf.push_back(counts);
    }
    return {{"k1", params_.k1}, {"b", params_.b}, {"avgdl", avgdl_},
            {"doc_lengths", doc_lengths_}, {"tf", tf}, {"df", df}};
}

Bm25Index Bm25Index::from_json(const nlohmann::json& j) {
    Bm25Index index;
    index.params_ = {j.at("k1").get<double>(), j.at("b").get<double>()};
    index.doc_lengths_ = j.at("doc_lengths").get<std::vector<std::size_t>>();
    index.term_counts_ = j.at("tf").get<std::vector<std::map<std::string, std::uint32_t>>>();
    if (index.doc_lengths_.size() != index.term_counts_.size()) {
        throw LoadError("lexical index has mismatched doc_lengths and tf rows");
    }
    index.finish();
    return index;
}

namespace {

std::vector<std::size_t> top_positions(const std::vector<double>& scores, const std::vector<std::uint64_t>& ids,
                                       std::size_t depth) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    auto better = [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : ids[a] < ids[b];
    };
    if (depth < order.size()) {
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth), order.end(), better);
        order.resize(depth);
    }
    return order;
}

std::vector<double> min_max(const std::vector<double>& scores, const std::vector<std::size_t>& pool) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (auto i : pool) {
        lo = std::min(lo, scores[i]);
        hi = std::max(hi, scores[i]);
    }
    std::vector<double> out;
    out.reserve(pool.size());
    for (auto i : pool) {
        out.push_back(hi > lo ? (scores[i] - lo) / (hi - lo) : 1.0);
    }
    return out;
}

void sort_ranked(std::vector<ScoredDoc>& docs) {
    std::sort(docs.begin(), docs.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        return a.fused_score != b.fused_score ? a.fused_score > b.fused_score : a.doc_id < b.doc_id;
    });
}

} // namespace

std::vector<ScoredDoc> fuse(const std::vector<std::uint64_t>& ids, const std::vector<double>& lexical,
                            const std::vector<double>& dense, const FusionWeights& weights, std::size_t pool_depth) {
    if (ids.size() != lexical.size() || ids.size() != dense.size()) {
        throw InternalError("fuse called with mismatched score lists");
    }
    weights.validate();
    std::vector<std::size_t> pool = top_positions(lexical, ids, pool_depth);
    const auto dense_top = top_positions(dense, ids, pool_depth);
    pool.insert(pool.end(), dense_top.begin(), dense_top.end());
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

    const auto lex_norm = min_max(lexical, pool);
    const auto dense_norm = min_max(dense, pool);
    std::vector<ScoredDoc> out;
    out.reserve(pool.size());
    for (std::size_t p = 0; p < pool.size(); ++p) {
        const auto i = pool[p];
        const double fused = weights.lexical * lex_norm[p] + weights.dense * dense_norm[p];
        out.push_back({ids[i], std::clamp(fused, 0.0, 1.0), lexical[i], dense[i]});
    }
    sort_ranked(out);
    return out;
}

HybridIndex HybridIndex::build(std::vector<Document> docs, std::shared_ptr<const llm::Embedder> embedder,
                               FusionWeights weights, Bm25Params params) {
    weights.validate();
    if (docs.empty()) {
        throw InputError("cannot build a retrieval index over zero documents");
    }
    if (!embedder) {
        throw ConfigError("retrieval index needs an embedding backend");
    }
    HybridIndex index;
    index.weights_ = weights;
    index.embedder_ = std::move(embedder);
    std::vector<std::vector<std::string>> terms;
    terms.reserve(docs.size());
    std::vector<std::string> to_embed;
    std::vector<std::size_t> embed_rows;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (!index.position_.emplace(docs[i].id, i).second) {
            throw InputError("duplicate document id " + std::to_string(docs[i].id));
        }
        terms.push_back(text::lexical_terms(docs[i].text));
        if (!text::trim(docs[i].text).empty()) {
            to_embed.push_back(docs[i].text);
            embed_rows.push_back(i);
        }
    }
    index.bm25_ = Bm25Index(terms, params);
    index.embeddings_.resize(docs.size());
    if (!to_embed.empty()) {
        auto vectors = index.embedder_->embed(to_embed);
        for (std::size_t r = 0; r < embed_rows.size(); ++r) {
            index.embeddings_[embed_rows[r]] = std::move(vectors[r]);
        }
        const auto dim = index.embeddings_[embed_rows.front()].dimension();
        for (auto& row : index.embeddings_) {
            if (row.dimension() == 0) {
                row = llm::EmbeddingVector(std::vector<double>(dim, 0.0));
            }
        }
    }
    index.docs_ = std::move(docs);
    index.norms_.reserve(index.embeddings_.size());
    for (const auto& row : index.embeddings_) {
        index.norms_.push_back(row.norm());
    }
    return index;
}

std::vector<std::string> HybridIndex::query_terms(const std::string& query) const {
    auto terms = text::lexical_terms(query);
    if (terms.empty()) {
        throw InputError("query has no searchable terms: '" + query + "'");
    }
    return terms;
}

std::vector<double> HybridIndex::lexical_scores(const std::string& query) const {
    return bm25_.score(query_terms(query));
}

std::vector<double> HybridIndex::dense_scores(const std::string& query) const {
    const auto q = embedder_->embed_one(query);
    std::vector<double> scores(docs_.size(), 0.0);
    if (!embeddings_.empty() && embeddings_.front().dimension() != q.dimension()) {
        throw ConfigError("embedding backend dimension " + std::to_string(q.dimension()) +
                          " differs from index dimension " + std::to_string(embeddings_.front().dimension()));
    }
    const double qn = q.norm();
    if (qn == 0.0) {
        return scores;
    }
    const auto& qv = q.values();
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        if (norms_[i] == 0.0) {
            continue;
        }
        const auto& dv = embeddings_[i].values();
        double dot = 0.0;
        for (std::size_t d = 0; d < qv.size(); ++d) {
            dot += qv[d] * dv[d];
        }
        scores[i] = dot / (qn * norms_[i]);
    }
    return scores;
}

std::vector<ScoredDoc> HybridIndex::search(const std::string& query, std::size_t k) const {
    if (k == 0) {
        throw InputError("search needs k >= 1");
    }
    const auto lexical = lexical_scores(query);
    const auto dense = dense_scores(query);
    std::vector<std::uint64_t> ids;
    ids.reserve(docs_.size());
    for (const auto& d : docs_) {
        ids.push_back(d.id);
    }
    auto ranked = fuse(ids, lexical, dense, weights_, std::max(kMinFusionPool, k));
    if (ranked.size() > k) {
        ranked.resize(k);
    }
    return ranked;
}

std::vector<ScoredDoc> HybridIndex::search_progressive(const std::string& matched_prefix,
                                                       const std::string& new_segment, std::size_t k) const {
    if (text::trim(matched_prefix).empty()) {
        return search(new_segment, k);
    }
    const auto segment_only = search(new_segment, k);
    const auto combined = search(matched_prefix + " " + new_segment, k);
    std::map<std::uint64_t, ScoredDoc> merged;
    for (const auto& d : combined) {
        merged[d.doc_id] = {d.doc_id, d.fused_score / 2.0, d.lex_score_raw, d.dense_score_raw};
    }
    for (const auto& d : segment_only) {
        auto [it, inserted] = merged.try_emplace(d.doc_id, ScoredDoc{d.doc_id, 0.0, 0.0, 0.0});
        it->second.fused_score += d.fused_score / 2.0;
        it->second.lex_score_raw = d.lex_score_raw;
        it->second.dense_score_raw = d.dense_score_raw;
    }
    std::vector<ScoredDoc> out;
    out.reserve(merged.size());
    for (auto& [_, d] : merged) {
        out.push_back(d);
    }
    sort_ranked(out);
    if (out.size() > k) {
        out.resize(k);
    }
    return out;
}

const Document& HybridIndex::document(std::uint64_t id) const {
    const auto it = position_.find(id);
    if (it == position_.end()) {
        throw NotFoundError("no document with id " + std::to_string(id));
    }
    return docs_[it->second];
}

HybridIndex HybridIndex::with_weights(FusionWeights weights) const {
    weights.validate();
    HybridIndex copy = *this;
    copy.weights_ = weights;
    return copy;
}

void write_embeddings(const std::filesystem::path& path, const std::vector<llm::EmbeddingVector>& rows) {
    std::ostringstream out;
    const std::uint64_t n = rows.size();
    const std::uint64_t dim = rows.empty() ? 0 : rows.front().dimension();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    for (const auto& row : rows) {
        if (row.dimension() != dim) {
            throw InternalError("embedding rows differ in dimension");
        }
        out.write(reinterpret_cast<const char*>(row.values().data()),
                  static_cast<std::streamsize>(dim * sizeof(double)));
    }
    util::write_file_atomic(path, out.str());
}

std::vector<llm::EmbeddingVector> read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("missing embedding file " + path.string());
    }
    std::uint64_t n = 0;
    std::uint64_t dim = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    if (!in) {
        throw LoadError("truncated embedding header in " + path.string());
    }
    const auto expected = 16 + n * dim * sizeof(double);
    if (std::filesystem::file_size(path) != expected) {
        throw LoadError("embedding file " + path.string() + " has the wrong size for " + std::to_string(n) +
                        " x " + std::to_string(dim));
    }
    std::vector<llm::EmbeddingVector> rows;
    rows.reserve(n);
    for (std::uint64_t r = 0; r < n; ++r) {
        std::vector<double> values(dim);
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(dim * sizeof(double)));
        rows.emplace_back(std::move(values));
    }
    return rows;
}

void HybridIndex::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& d : docs_) {
        docs.push_back({{"id", d.id}, {"text", d.text}});
    }
    nlohmann::json j = bm25_.to_json();
    j["documents"] = std::move(docs);
    j["weights"] = {weights_.lexical, weights_.dense};
    util::write_file_atomic(dir / "lexical.json", j.dump());
    write_embeddings(dir / "embeddings.bin", embeddings_);
}

HybridIndex HybridIndex::load(const std::filesystem::path& dir, std::shared_ptr<const llm::Embedder> embedder) {
    const auto lexical_path = dir / "lexical.json";
    std::ifstream in(lexical_path);
    if (!in) {
        throw LoadError("missing lexical index " + lexical_path.string());
    }
    HybridIndex index;
    try {
        const auto j = nlohmann::json::parse(in);
        index.bm25_ = Bm25Index::from_json(j);
        for (const auto& d : j.at("documents")) {
            index.docs_.push_back({d.at("id").get<std::uint64_t>(), d.at("text").get<std::string>()});
        }
        const auto w = j.at("weights");
        index.weights_ = {w.at(0).get<double>(), w.at(1).get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed lexical index " + lexical_path.string() + ": " + e.what());
    }
    index.weights_.validate();
    index.embeddings_ = read_embeddings(dir / "embeddings.bin");
    if (index.embeddings_.size() != index.docs_.size() || index.bm25_.size() != index.docs_.size()) {
        throw LoadError("index files in " + dir.string() + " disagree on the document count");
    }
    for (std::size_t i = 0; i < index.docs_.size(); ++i) {
        if (!index.position_.emplace(index.docs_[i].id, i).second) {
            throw LoadError("duplicate document id in " + lexical_path.string());
        }
        index.norms_.push_back(index.embeddings_[i].norm());
    }
    index.embedder_ = std::move(embedder);
    return index;
}

} // namespace rolekit::retrieval
