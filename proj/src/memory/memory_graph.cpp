#include "rolekit/memory/memory_graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "rolekit/error.hpp"
#include "rolekit/llm/json_reply.hpp"
#include "rolekit/llm/language.hpp"
#include "rolekit/text/utf8.hpp"
#include "rolekit/util/files.hpp"
#include "rolekit/util/parallel.hpp"

namespace rolekit::memory {

namespace {

constexpr int kKindShift = 48;
constexpr std::uint64_t kLocalMask = (std::uint64_t{1} << kKindShift) - 1;

std::string trimmed_string(const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return "";
    }
    if (!obj.at(key).is_string()) {
        throw nlohmann::json::type_error::create(302, std::string(key) + " must be a string", &obj);
    }
    return std::string(text::trim(obj.at(key).get_ref<const std::string&>()));
}

} // namespace

std::string_view hit_kind_name(HitKind kind) noexcept {
    switch (kind) {
    case HitKind::entity:
        return "entity";
    case HitKind::relation:
        return "relation";
    case HitKind::chunk:
        return "chunk";
    }
    return "chunk";
}

std::uint64_t doc_id_for(HitKind kind, std::uint64_t local_id) noexcept {
    return (static_cast<std::uint64_t>(kind) << kKindShift) | (local_id & kLocalMask);
}

HitKind kind_of(std::uint64_t doc_id) noexcept {
    return static_cast<HitKind>(doc_id >> kKindShift);
}

std::uint64_t local_id_of(std::uint64_t doc_id) noexcept {
    return doc_id & kLocalMask;
}

ExtractedGraph parse_graph_reply(const std::string& raw) {
    const auto j = llm::parse_json_reply(raw);
    if (!j.is_object() || !j.contains("entities") || !j.at("entities").is_array()) {
        throw ParseError("graph reply must be an object with an \"entities\" array", raw);
    }
    ExtractedGraph g;
    try {
        for (const auto& e : j.at("entities")) {
            auto name = trimmed_string(e, "name");
            if (!name.empty()) {
                g.entities.push_back({std::move(name), trimmed_string(e, "description")});
            }
        }
        if (j.contains("relations")) {
            if (!j.at("relations").is_array()) {
                throw ParseError("graph reply \"relations\" must be an array", raw);
            }
            for (const auto& r : j.at("relations")) {
                auto source = trimmed_string(r, "source");
                auto target = trimmed_string(r, "target");
                if (source.empty() || target.empty()) {
                    continue;
                }
                auto label = trimmed_string(r, "label");
                g.relations.push_back({std::move(source), std::move(target), label.empty() ? "related_to" : label,
                                       trimmed_string(r, "description")});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("graph reply has a malformed entry: ") + e.what(), raw);
    }
    return g;
}

std::string MemoryGraph::entity_text(const EntityNode& e) {
    return e.description.empty() ? e.name : e.name + ": " + e.description;
}

std::string MemoryGraph::relation_text(const RelationEdge& r) const {
    std::string out = r.label;
    if (!r.description.empty()) {
        out += ": " + r.description;
    }
    return out;
}

MemoryGraph MemoryGraph::build(const std::string& book_id, const std::vector<ingest::Chunk>& chunks,
                               const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                               std::shared_ptr<const llm::Embedder> embedder, const GraphBuildOptions& options) {
    if (chunks.empty()) {
        throw InputError("memory graph needs at least one chunk");
    }
    struct Outcome {
        bool ok = false;
        ExtractedGraph graph;
        std::string warning;
    };
    const auto outcomes = util::parallel_map(chunks.size(), options.parallelism, [&](std::size_t i) {
        const auto& chunk = chunks[i];
        Outcome out;
        if (text::trim(chunk.text).empty()) {
            out.ok = true;
            return out;
        }
        const auto language = llm::select_prompt_language(chunk.text);
        const auto request = prompts.request("graph_extract", language, {{"chunk", chunk.text}});
        try {
            out.graph = llm::complete_structured(client, request, parse_graph_reply,
                                                 [&](const std::string& raw, const std::string& why) {
                                                     return prompts.repair_request(request, raw, why, language);
                                                 });
            out.ok = true;
        } catch (const ParseError& e) {
            out.warning = "chunk " + std::to_string(chunk.chunk_id) + " skipped: " + e.what();
        }
        return out;
    });

    MemoryGraph graph;
    graph.book_id_ = book_id;
    graph.chunks_ = chunks;

    std::map<std::string, std::size_t> entity_by_key;
    std::vector<std::vector<std::string>> descriptions;
    auto entity_for = [&](const std::string& name, std::size_t chunk_id) {
        const auto key = ingest::normalize_name(name);
        auto [it, inserted] = entity_by_key.emplace(key, graph.entities_.size());
        if (inserted) {
            graph.entities_.push_back({graph.entities_.size(), name, "", {}});
            descriptions.emplace_back();
        }
        graph.entities_[it->second].source_chunk_ids.insert(chunk_id);
        return it->second;
    };
    std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> relation_by_key;
    std::vector<std::vector<std::string>> relation_descriptions;

    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto& outcome = outcomes[i];
        if (!outcome.ok) {
            graph.warnings_.push_back(outcome.warning);
            continue;
        }
        const auto chunk_id = chunks[i].chunk_id;
        for (const auto& e : outcome.graph.entities) {
            const auto id = entity_for(e.name, chunk_id);
            auto& list = descriptions[id];
            if (!e.description.empty() && std::find(list.begin(), list.end(), e.description) == list.end()) {
                list.push_back(e.description);
            }
        }
        for (const auto& r : outcome.graph.relations) {
            const auto src = entity_for(r.source, chunk_id);
            const auto dst = entity_for(r.target, chunk_id);
            const auto key = std::make_tuple(src, dst, ingest::normalize_name(r.label));
            auto [it, inserted] = relation_by_key.emplace(key, graph.relations_.size());
            if (inserted) {
                graph.relations_.push_back({graph.relations_.size(), src, dst, r.label, "", {}});
                relation_descriptions.emplace_back();
            }
            graph.relations_[it->second].source_chunk_ids.insert(chunk_id);
            auto& list = relation_descriptions[it->second];
            if (!r.description.empty() && std::find(list.begin(), list.end(), r.description) == list.end()) {
                list.push_back(r.description);
            }
        }
    }
    if (graph.entities_.empty()) {
        std::string detail = graph.warnings_.empty() ? "every chunk returned an empty extraction"
                                                     : std::to_string(graph.warnings_.size()) + " chunk(s) failed";
        throw ExtractionError("memory graph extraction produced no entities (" + detail + ")", "");
    }

    const auto language = llm::select_prompt_language(chunks.front().text);
    for (auto& e : graph.entities_) {
        const auto& list = descriptions[e.entity_id];
        if (list.size() >= std::max<std::size_t>(options.summarize_min_descriptions, 2)) {
            std::string notes;
            for (const auto& d : list) {
                notes += "- " + d + "\n";
            }
            e.description = std::string(text::trim(client.complete(
                prompts.request("entity_summary", language, {{"name", e.name}, {"descriptions", notes}}))));
        } else {
            for (const auto& d : list) {
                e.description += (e.description.empty() ? "" : " ") + d;
            }
        }
    }
    for (auto& r : graph.relations_) {
        for (const auto& d : relation_descriptions[r.relation_id]) {
            r.description += (r.description.empty() ? "" : " ") + d;
        }
    }
    graph.build_index(std::move(embedder), options.weights);
    return graph;
}

void MemoryGraph::build_index(std::shared_ptr<const llm::Embedder> embedder, const retrieval::FusionWeights& weights) {
    incident_.assign(entities_.size(), {});
    for (const auto& r : relations_) {
        incident_[r.src].push_back(r.relation_id);
        if (r.dst != r.src) {
            incident_[r.dst].push_back(r.relation_id);
        }
    }
    if (index_) {
        return;
    }
    std::vector<retrieval::Document> docs;
    for (const auto& e : entities_) {
        docs.push_back({doc_id_for(HitKind::entity, e.entity_id), entity_text(e)});
    }
    for (const auto& r : relations_) {
        docs.push_back({doc_id_for(HitKind::relation, r.relation_id), relation_text(r)});
    }
    for (const auto& c : chunks_) {
        docs.push_back({doc_id_for(HitKind::chunk, c.chunk_id), c.text});
    }
    index_ = std::make_shared<const retrieval::HybridIndex>(
        retrieval::HybridIndex::build(std::move(docs), std::move(embedder), weights));
}

std::vector<retrieval::ScoredDoc> MemoryGraph::direct_scores(const std::vector<std::string>& keywords) const {
    std::string query;
    for (const auto& k : keywords) {
        const auto t = text::trim(k);
        if (!t.empty()) {
            query += (query.empty() ? "" : " ") + std::string(t);
        }
    }
    if (query.empty()) {
        throw InputError("memory query needs at least one keyword");
    }
    return index_->search(query, index_->size());
}

MemoryHit MemoryGraph::make_hit(std::uint64_t doc_id, double score, bool expanded) const {
    MemoryHit hit;
    hit.kind = kind_of(doc_id);
    hit.doc_id = doc_id;
    hit.score = score;
    hit.expanded = expanded;
    hit.text = index_->document(doc_id).text;
    const auto local = local_id_of(doc_id);
    switch (hit.kind) {
    case HitKind::entity:
        hit.provenance.assign(entities_[local].source_chunk_ids.begin(), entities_[local].source_chunk_ids.end());
        break;
    case HitKind::relation:
        hit.provenance.assign(relations_[local].source_chunk_ids.begin(), relations_[local].source_chunk_ids.end());
        break;
    case HitKind::chunk:
        hit.provenance = {static_cast<std::size_t>(local)};
        break;
    }
    hit.first_chunk = hit.provenance.empty() ? 0 : hit.provenance.front();
    return hit;
}

std::vector<MemoryHit> MemoryGraph::query(const std::vector<std::string>& keywords, const QueryOptions& options) const {
    if (options.k == 0) {
        throw InputError("memory query needs k >= 1");
    }
    if (!index_ || index_->size() == 0) {
        throw InputError("memory graph is empty");
    }
    const auto direct = direct_scores(keywords);
    std::map<std::uint64_t, double> score;
    for (const auto& d : direct) {
        score[d.doc_id] = d.fused_score;
    }
    std::map<std::uint64_t, bool> expanded;
    std::vector<std::pair<std::uint64_t, double>> frontier;
    for (std::size_t i = 0; i < direct.size() && i < options.k; ++i) {
        frontier.emplace_back(direct[i].doc_id, direct[i].fused_score);
    }
    auto neighbours = [this](std::uint64_t doc_id) {
        std::vector<std::uint64_t> out;
        const auto local = local_id_of(doc_id);
        if (kind_of(doc_id) == HitKind::entity) {
            for (auto r : incident_[local]) {
                out.push_back(doc_id_for(HitKind::relation, r));
            }
        } else if (kind_of(doc_id) == HitKind::relation) {
            out.push_back(doc_id_for(HitKind::entity, relations_[local].src));
            out.push_back(doc_id_for(HitKind::entity, relations_[local].dst));
        }
        return out;
    };
    for (std::size_t step = 0; step < options.depth && !frontier.empty(); ++step) {
        std::vector<std::pair<std::uint64_t, double>> next;
        for (const auto& [id, s] : frontier) {
            const double carried = options.expansion_weight * s;
            for (auto n : neighbours(id)) {
                if (carried > score[n]) {
                    score[n] = carried;
                    expanded[n] = true;
                    next.emplace_back(n, carried);
                }
            }
        }
        frontier = std::move(next);
    }
    std::vector<std::pair<std::uint64_t, double>> ranked(score.begin(), score.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<MemoryHit> hits;
    for (std::size_t i = 0; i < ranked.size() && i < options.k; ++i) {
        hits.push_back(make_hit(ranked[i].first, ranked[i].second, expanded[ranked[i].first]));
    }
    return hits;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    util::write_file_atomic(path, content);
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("memory graph file missing: " + path.string());
    }
    std::vector<nlohmann::json> out;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw LoadError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON");
        }
        out.push_back(std::move(j));
    }
    return out;
}

} // namespace

void MemoryGraph::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["format_version"] = kGraphFormatVersion;
    manifest["book_id"] = book_id_;
    manifest["entities"] = entities_.size();
    manifest["relations"] = relations_.size();
    manifest["chunks"] = chunks_.size();
    manifest["warnings"] = warnings_;
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::string lines;
    for (const auto& e : entities_) {
        nlohmann::ordered_json j;
        j["entity_id"] = e.entity_id;
        j["name"] = e.name;
        j["description"] = e.description;
        j["source_chunk_ids"] = e.source_chunk_ids;
        lines += j.dump() + "\n";
    }
    write_file(dir / "entities.jsonl", lines);
    lines.clear();
    for (const auto& r : relations_) {
        nlohmann::ordered_json j;
        j["relation_id"] = r.relation_id;
        j["src"] = r.src;
        j["dst"] = r.dst;
        j["label"] = r.label;
        j["description"] = r.description;
        j["source_chunk_ids"] = r.source_chunk_ids;
        lines += j.dump() + "\n";
    }
    write_file(dir / "relations.jsonl", lines);
    lines.clear();
    for (const auto& c : chunks_) {
        lines += ingest::chunk_to_json(c).dump() + "\n";
    }
    write_file(dir / "chunks.jsonl", lines);
    index_->save(dir / "index");
}

MemoryGraph MemoryGraph::load(const std::filesystem::path& dir, std::shared_ptr<const llm::Embedder> embedder) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw LoadError("memory graph manifest missing: " + manifest_path.string());
    }
    const auto manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object()) {
        throw LoadError("malformed memory graph manifest " + manifest_path.string());
    }
    const auto version = manifest.value("format_version", -1);
    if (version != kGraphFormatVersion) {
        throw LoadError("memory graph format version " + std::to_string(version) + " in " + dir.string() +
                        " is not the supported version " + std::to_string(kGraphFormatVersion));
    }
    MemoryGraph graph;
    try {
        graph.book_id_ = manifest.value("book_id", std::string());
        graph.warnings_ = manifest.value("warnings", std::vector<std::string>{});
        for (const auto& j : read_jsonl(dir / "entities.jsonl")) {
            graph.entities_.push_back({j.at("entity_id").get<std::size_t>(), j.at("name").get<std::string>(),
                                       j.at("description").get<std::string>(),
                                       j.at("source_chunk_ids").get<std::set<std::size_t>>()});
        }
        for (const auto& j : read_jsonl(dir / "relations.jsonl")) {
            graph.relations_.push_back({j.at("relation_id").get<std::size_t>(), j.at("src").get<std::size_t>(),
                                        j.at("dst").get<std::size_t>(), j.at("label").get<std::string>(),
                                        j.at("description").get<std::string>(),
                                        j.at("source_chunk_ids").get<std::set<std::size_t>>()});
        }
        for (const auto& j : read_jsonl(dir / "chunks.jsonl")) {
            graph.chunks_.push_back(ingest::chunk_from_json(j));
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed memory graph record in " + dir.string() + ": " + e.what());
    }
    for (std::size_t i = 0; i < graph.entities_.size(); ++i) {
        if (graph.entities_[i].entity_id != i) {
            throw LoadError("memory graph entities.jsonl is out of order");
        }
    }
    for (std::size_t i = 0; i < graph.relations_.size(); ++i) {
        const auto& r = graph.relations_[i];
        if (r.relation_id != i || r.src >= graph.entities_.size() || r.dst >= graph.entities_.size()) {
            throw LoadError("memory graph relation " + std::to_string(i) + " has a bad id or endpoint");
        }
    }
    if (manifest.value("entities", std::size_t{0}) != graph.entities_.size() ||
        manifest.value("relations", std::size_t{0}) != graph.relations_.size() ||
        manifest.value("chunks", std::size_t{0}) != graph.chunks_.size()) {
        throw LoadError("memory graph files in " + dir.string() + " disagree with the manifest counts");
    }
    graph.index_ = std::make_shared<const retrieval::HybridIndex>(retrieval::HybridIndex::load(dir / "index", embedder));
    if (graph.index_->size() != graph.entities_.size() + graph.relations_.size() + graph.chunks_.size()) {
        throw LoadError("memory graph index in " + dir.string() + " does not match its records");
    }
    graph.build_index(std::move(embedder), graph.index_->weights());
    return graph;
}

} // namespace rolekit::memory
