#include "rolekit/ingest/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "rolekit/error.hpp"
#include "rolekit/llm/json_reply.hpp"
#include "rolekit/llm/language.hpp"
#include "rolekit/text/utf8.hpp"
#include "rolekit/util/files.hpp"
#include "rolekit/util/parallel.hpp"

namespace rolekit::ingest {

std::vector<Chunk> chunk_text(std::string_view document, std::size_t chunk_size, std::size_t overlap,
                              const std::string& source_doc, const text::Tokenizer& tokenizer) {
    if (chunk_size <= overlap) {
        throw ConfigError("chunk size (" + std::to_string(chunk_size) + ") must exceed overlap (" +
                          std::to_string(overlap) + ")");
    }
    const auto tokens = tokenizer.tokenize(document);
    const std::size_t n = tokens.size();
    const std::size_t stride = chunk_size - overlap;
    std::vector<Chunk> chunks;
    for (std::size_t start = 0; start < n; start += stride) {
        const std::size_t end = std::min(start + chunk_size, n);
        Chunk chunk;
        chunk.chunk_id = chunks.size();
        chunk.token_span = {start, end};
        chunk.source_doc = source_doc;
        const auto first = tokens[start].begin;
        chunk.text = std::string(document.substr(first, tokens[end - 1].end - first));
        chunks.push_back(std::move(chunk));
        if (end == n) {
            break;
        }
    }
    return chunks;
}

std::vector<UtteranceRecord> parse_dialogue_reply(const std::string& raw, std::size_t chunk_id) {
    const auto j = llm::parse_json_reply(raw);
    if (!j.is_array()) {
        throw ParseError("dialogue reply is not a JSON array", raw);
    }
    std::vector<UtteranceRecord> out;
    for (const auto& entry : j) {
        if (!entry.is_object() || !entry.contains("speaker") || !entry.contains("utterance") ||
            !entry["speaker"].is_string() || !entry["utterance"].is_string()) {
            throw ParseError("dialogue entries must be objects with string speaker and utterance", raw);
        }
        const auto speaker = text::trim(entry["speaker"].get_ref<const std::string&>());
        const auto words = text::trim(entry["utterance"].get_ref<const std::string&>());
        if (speaker.empty() || words.empty()) {
            continue;
        }
        out.push_back({std::string(speaker), std::string(words), chunk_id, out.size()});
    }
    return out;
}

std::vector<UtteranceRecord> extract_dialogues(const Chunk& chunk, const llm::LlmClient& client,
                                               const prompts::PromptLibrary& prompts) {
    if (text::trim(chunk.text).empty()) {
        throw InputError("cannot extract dialogue from an empty chunk");
    }
    const auto language = llm::select_prompt_language(chunk.text);
    const auto request = prompts.request("dialogue_extract", language, {{"chunk", chunk.text}});
    std::string last_raw;
    try {
        return llm::complete_structured(
            client, request,
            [&](const std::string& raw) {
                last_raw = raw;
                return parse_dialogue_reply(raw, chunk.chunk_id);
            },
            [&](const std::string& raw, const std::string& why) {
                return prompts.repair_request(request, raw, why, language);
            });
    } catch (const ParseError& e) {
        throw ExtractionError("dialogue extraction failed for chunk " + std::to_string(chunk.chunk_id) + ": " +
                                  e.what(),
                              last_raw);
    }
}

std::vector<UtteranceRecord> extract_all_dialogues(const std::vector<Chunk>& chunks, const llm::LlmClient& client,
                                                   const prompts::PromptLibrary& prompts, std::size_t parallelism) {
    const auto per_chunk = util::parallel_map(chunks.size(), parallelism, [&](std::size_t i) {
        if (text::trim(chunks[i].text).empty()) {
            return std::vector<UtteranceRecord>{};
        }
        return extract_dialogues(chunks[i], client, prompts);
    });
    std::vector<UtteranceRecord> out;
    for (const auto& records : per_chunk) {
        out.insert(out.end(), records.begin(), records.end());
    }
    return out;
}

std::string normalize_name(std::string_view name) {
    std::string out;
    bool pending_space = false;
    std::size_t pos = 0;
    while (pos < name.size()) {
        const auto cp = text::decode_at(name, pos);
        pos += cp.length;
        char32_t c = cp.value;
        if (text::is_whitespace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (c >= 0xFF01 && c <= 0xFF5E) {
            c -= 0xFEE0;
        }
        if (c >= U'A' && c <= U'Z') {
            c += 32;
        } else if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) {
            c += 32;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        text::append_utf8(out, c);
    }
    return out;
}

namespace {

struct NameGroup {
    std::string key;
    std::map<std::string, std::size_t> surface_count;
    std::map<std::string, std::pair<std::size_t, std::size_t>> surface_first;
    std::string canonical;
};

bool all_cjk(std::string_view s, std::size_t& codepoints) {
    codepoints = 0;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto cp = text::decode_at(s, pos);
        pos += cp.length;
        if (!text::is_cjk(cp.value) || text::is_punctuation(cp.value)) {
            return false;
        }
        ++codepoints;
    }
    return codepoints > 0;
}

std::vector<std::string> words_of(const std::string& key) {
    std::vector<std::string> out;
    std::istringstream in(key);
    for (std::string w; in >> w;) {
        out.push_back(w);
    }
    return out;
}

// Whether `short_key` names a part of `long_key`.
bool contained_in(const std::string& short_key, const std::string& long_key) {
    if (short_key == long_key) {
        return false;
    }
    std::size_t short_len = 0;
    std::size_t long_len = 0;
    if (all_cjk(short_key, short_len)) {
        return short_len >= 2 && all_cjk(long_key, long_len) && long_len > short_len &&
               long_key.find(short_key) != std::string::npos;
    }
    if (short_key.find(' ') != std::string::npos) {
        return false;
    }
    const auto words = words_of(long_key);
    return words.size() > 1 && std::find(words.begin(), words.end(), short_key) != words.end();
}

std::size_t codepoint_count(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t pos = 0; pos < s.size(); pos += text::decode_at(s, pos).length) {
        ++n;
    }
    return n;
}

} // namespace

MergeResult merge_speakers(const std::vector<UtteranceRecord>& records, const SpeakerAliasMap& user_aliases) {
    std::map<std::string, std::string> user_key;
    for (const auto& [canonical, aliases] : user_aliases) {
        auto names = aliases;
        names.insert(canonical);
        for (const auto& alias : names) {
            const auto key = normalize_name(alias);
            const auto [it, inserted] = user_key.emplace(key, canonical);
            if (!inserted && it->second != canonical) {
                throw ConfigError("alias '" + alias + "' is listed under both '" + it->second + "' and '" +
                                  canonical + "'");
            }
        }
    }

    std::map<std::string, NameGroup> groups;
    for (const auto& r : records) {
        const auto key = normalize_name(r.speaker);
        auto& g = groups[key];
        g.key = key;
        ++g.surface_count[r.speaker];
        const auto pos = std::make_pair(r.chunk_id, r.ordinal);
        auto [it, inserted] = g.surface_first.emplace(r.speaker, pos);
        if (!inserted && pos < it->second) {
            it->second = pos;
        }
    }

    std::map<std::string, std::string> resolved;
    for (auto& [key, g] : groups) {
        if (const auto u = user_key.find(key); u != user_key.end()) {
            g.canonical = u->second;
        } else {
            const std::string* best = nullptr;
            for (const auto& [surface, count] : g.surface_count) {
                if (best == nullptr || count > g.surface_count.at(*best) ||
                    (count == g.surface_count.at(*best) && g.surface_first.at(surface) < g.surface_first.at(*best))) {
                    best = &surface;
                }
            }
            g.canonical = *best;
        }
        resolved[key] = g.canonical;
    }
    for (const auto& [key, canonical] : user_key) {
        resolved.emplace(key, canonical);
    }

    // Longer names settle first so a name merged into another passes its
    // final canonical on to anything it contains.
    std::vector<std::string> candidates;
    for (const auto& [key, _] : groups) {
        if (!user_key.count(key)) {
            candidates.push_back(key);
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        return codepoint_count(a) > codepoint_count(b);
    });
    std::vector<AmbiguousName> ambiguous;
    for (const auto& key : candidates) {
        std::set<std::string> targets;
        for (const auto& [other, canonical] : resolved) {
            if (contained_in(key, other) && canonical != resolved[key]) {
                targets.insert(canonical);
            }
        }
        if (targets.size() == 1) {
            resolved[key] = *targets.begin();
            groups[key].canonical = *targets.begin();
        } else if (targets.size() > 1) {
            ambiguous.push_back({groups[key].canonical, {targets.begin(), targets.end()}});
        }
    }

    MergeResult result;
    for (const auto& [canonical, aliases] : user_aliases) {
        auto& set = result.aliases[canonical];
        set.insert(aliases.begin(), aliases.end());
        set.insert(canonical);
    }
    for (const auto& [key, g] : groups) {
        auto& set = result.aliases[g.canonical];
        set.insert(g.canonical);
        for (const auto& [surface, _] : g.surface_count) {
            set.insert(surface);
        }
    }
    result.records.reserve(records.size());
    for (const auto& r : records) {
        auto copy = r;
        copy.speaker = groups.at(normalize_name(r.speaker)).canonical;
        result.records.push_back(std::move(copy));
    }
    std::stable_sort(result.records.begin(), result.records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.chunk_id, a.ordinal) < std::tie(b.chunk_id, b.ordinal);
    });
    std::sort(ambiguous.begin(), ambiguous.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    result.ambiguous = std::move(ambiguous);
    return result;
}

retrieval::HybridIndex build_chunk_index(const std::vector<Chunk>& chunks,
                                         std::shared_ptr<const llm::Embedder> embedder,
                                         retrieval::FusionWeights weights) {
    std::vector<retrieval::Document> docs;
    docs.reserve(chunks.size());
    for (const auto& c : chunks) {
        docs.push_back({c.chunk_id, c.text});
    }
    return retrieval::HybridIndex::build(std::move(docs), std::move(embedder), weights);
}

std::vector<Chunk> select_relevant_chunks(const std::string& speaker, const SpeakerAliasMap& aliases,
                                          const std::vector<UtteranceRecord>& records,
                                          const std::vector<Chunk>& chunks, const retrieval::HybridIndex& index,
                                          std::size_t k) {
    if (index.size() == 0 || chunks.empty()) {
        throw InputError("relevant-chunk selection needs a non-empty chunk index");
    }
    if (k == 0) {
        throw InputError("relevant-chunk selection needs k >= 1");
    }
    std::string query = speaker;
    if (const auto it = aliases.find(speaker); it != aliases.end()) {
        for (const auto& alias : it->second) {
            if (alias != speaker) {
                query += " " + alias;
            }
        }
    }
    std::set<std::size_t> forced;
    for (const auto& r : records) {
        if (r.speaker == speaker) {
            forced.insert(r.chunk_id);
        }
    }
    std::unordered_map<std::size_t, const Chunk*> by_id;
    for (const auto& c : chunks) {
        by_id[c.chunk_id] = &c;
    }
    const auto ranked = index.search(query, index.size());
    std::size_t fill = k > forced.size() ? k - forced.size() : 0;
    std::vector<Chunk> out;
    for (const auto& hit : ranked) {
        const auto it = by_id.find(hit.doc_id);
        if (it == by_id.end()) {
            continue;
        }
        if (forced.count(hit.doc_id)) {
            out.push_back(*it->second);
        } else if (fill > 0) {
            out.push_back(*it->second);
            --fill;
        }
    }
    return out;
}

nlohmann::json chunk_to_json(const Chunk& chunk) {
    return {{"chunk_id", chunk.chunk_id},
            {"source_doc", chunk.source_doc},
            {"token_span", {chunk.token_span.start, chunk.token_span.end}},
            {"text", chunk.text}};
}

Chunk chunk_from_json(const nlohmann::json& j) {
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::size_t>();
    c.source_doc = j.value("source_doc", std::string());
    c.token_span = {j.at("token_span").at(0).get<std::size_t>(), j.at("token_span").at(1).get<std::size_t>()};
    c.text = j.at("text").get<std::string>();
    return c;
}

nlohmann::json utterance_to_json(const UtteranceRecord& record) {
    nlohmann::ordered_json j;
    j["speaker"] = record.speaker;
    j["text"] = record.text;
    j["chunk_id"] = record.chunk_id;
    j["ordinal"] = record.ordinal;
    return j;
}

UtteranceRecord utterance_from_json(const nlohmann::json& j) {
    UtteranceRecord r;
    r.speaker = j.at("speaker").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.chunk_id = j.at("chunk_id").get<std::size_t>();
    r.ordinal = j.at("ordinal").get<std::size_t>();
    if (text::trim(r.speaker).empty() || text::trim(r.text).empty()) {
        throw InputError("utterance records need a speaker and text");
    }
    return r;
}

nlohmann::json aliases_to_json(const SpeakerAliasMap& aliases) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [canonical, set] : aliases) {
        j[canonical] = std::vector<std::string>(set.begin(), set.end());
    }
    return j;
}

SpeakerAliasMap aliases_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("alias map must be a JSON object of name -> [aliases]");
    }
    SpeakerAliasMap out;
    for (const auto& [canonical, list] : j.items()) {
        auto& set = out[canonical];
        set.insert(canonical);
        for (const auto& alias : list) {
            set.insert(alias.get<std::string>());
        }
    }
    return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& content) {
    util::write_file_atomic(path, content);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("missing file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const std::filesystem::path& path) {
    const auto content = read_text(path);
    auto j = nlohmann::json::parse(content, nullptr, false);
    if (j.is_discarded()) {
        throw LoadError("malformed JSON in " + path.string());
    }
    return j;
}

} // namespace

void save_chunks(const std::filesystem::path& path, const std::vector<Chunk>& chunks) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : chunks) {
        j.push_back(chunk_to_json(c));
    }
    write_text(path, j.dump(1) + "\n");
}

std::vector<Chunk> load_chunks(const std::filesystem::path& path) {
    const auto j = read_json(path);
    std::vector<Chunk> out;
    try {
        for (const auto& c : j) {
            out.push_back(chunk_from_json(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed chunk in " + path.string() + ": " + e.what());
    }
    return out;
}

void save_utterances(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += utterance_to_json(r).dump() + "\n";
    }
    write_text(path, out);
}

std::vector<UtteranceRecord> load_utterances(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::vector<UtteranceRecord> out;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        try {
            out.push_back(utterance_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw LoadError(path.string() + ":" + std::to_string(line_no) + ": bad utterance record: " + e.what());
        }
    }
    return out;
}

void save_aliases(const std::filesystem::path& path, const SpeakerAliasMap& aliases) {
    write_text(path, aliases_to_json(aliases).dump(1) + "\n");
}

SpeakerAliasMap load_aliases(const std::filesystem::path& path) {
    const auto j = read_json(path);
    try {
        return aliases_from_json(j);
    } catch (const std::exception& e) {
        throw LoadError("malformed alias map " + path.string() + ": " + e.what());
    }
}

BookStore ingest_book(const std::string& book_id, std::string_view text, const IngestOptions& options,
                      const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                      const std::filesystem::path& out_dir) {
    BookStore store;
    store.book_id = book_id;
    store.chunks = chunk_text(text, options.chunk_size, options.overlap, book_id);
    const auto raw = extract_all_dialogues(store.chunks, client, prompts, options.parallelism);
    store.merged = merge_speakers(raw, options.user_aliases);

    save_chunks(out_dir / "chunks.json", store.chunks);
    save_utterances(out_dir / "utterances.jsonl", store.merged.records);
    save_aliases(out_dir / "aliases.json", store.merged.aliases);
    nlohmann::json amb = nlohmann::json::array();
    for (const auto& a : store.merged.ambiguous) {
        amb.push_back({{"name", a.name}, {"candidates", a.candidates}});
    }
    write_text(out_dir / "ambiguous.json", amb.dump(1) + "\n");
    return store;
}

BookStore load_book(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw NotFoundError("no ingested book at " + dir.string());
    }
    BookStore store;
    store.book_id = dir.filename().string();
    store.chunks = load_chunks(dir / "chunks.json");
    store.merged.records = load_utterances(dir / "utterances.jsonl");
    store.merged.aliases = load_aliases(dir / "aliases.json");
    if (std::filesystem::exists(dir / "ambiguous.json")) {
        for (const auto& a : read_json(dir / "ambiguous.json")) {
            store.merged.ambiguous.push_back(
                {a.at("name").get<std::string>(), a.at("candidates").get<std::vector<std::string>>()});
        }
    }
    return store;
}

std::vector<std::pair<std::string, std::size_t>> speaker_counts(const std::vector<UtteranceRecord>& records) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) {
        ++counts[r.speaker];
    }
    std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

} // namespace rolekit::ingest
