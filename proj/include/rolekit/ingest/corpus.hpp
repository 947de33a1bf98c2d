#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolekit/llm/client.hpp"
#include "rolekit/prompts/prompt_library.hpp"
#include "rolekit/retrieval/hybrid_index.hpp"
#include "rolekit/text/tokenizer.hpp"

namespace rolekit::ingest {

inline constexpr std::size_t kDefaultChunkSize = 512;
inline constexpr std::size_t kDefaultChunkOverlap = 64;

struct TokenSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct Chunk {
    std::size_t chunk_id = 0;
    std::string text;
    TokenSpan token_span;
    std::string source_doc;

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct UtteranceRecord {
    std::string speaker;
    std::string text;
    std::size_t chunk_id = 0;
    std::size_t ordinal = 0;

    friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

/// canonical name -> every surface name resolving to it (canonical included).
using SpeakerAliasMap = std::map<std::string, std::set<std::string>>;

/// Window i covers tokens [i*stride, min(i*stride + chunk_size, N)) with
/// stride = chunk_size - overlap; the last window ends at N. Chunk text is
/// the source bytes from the first token's start to the last token's end.
/// Throws ConfigError unless chunk_size > overlap.
std::vector<Chunk> chunk_text(std::string_view document, std::size_t chunk_size = kDefaultChunkSize,
                              std::size_t overlap = kDefaultChunkOverlap, const std::string& source_doc = "",
                              const text::Tokenizer& tokenizer = text::default_tokenizer());

/// Parses a dialogue_extract reply: a JSON array of {speaker, utterance}.
/// Entries with a blank speaker or utterance are dropped; ordinals count the
/// kept entries from 0. Throws ParseError on any other shape.
std::vector<UtteranceRecord> parse_dialogue_reply(const std::string& raw, std::size_t chunk_id);

/// One dialogue_extract call (plus at most one repair). Throws
/// ExtractionError carrying the last raw reply when both fail to parse.
std::vector<UtteranceRecord> extract_dialogues(const Chunk& chunk, const llm::LlmClient& client,
                                               const prompts::PromptLibrary& prompts);

/// Extracts every chunk, up to `parallelism` calls in flight, and returns
/// the records in chunk order.
std::vector<UtteranceRecord> extract_all_dialogues(const std::vector<Chunk>& chunks, const llm::LlmClient& client,
                                                   const prompts::PromptLibrary& prompts,
                                                   std::size_t parallelism = 1);

/// Case, width and whitespace folding used to compare speaker names.
std::string normalize_name(std::string_view name);

struct AmbiguousName {
    std::string name;
    std::vector<std::string> candidates;

    friend bool operator==(const AmbiguousName&, const AmbiguousName&) = default;
};

struct MergeResult {
    std::vector<UtteranceRecord> records; // sorted by (chunk_id, ordinal)
    SpeakerAliasMap aliases;
    std::vector<AmbiguousName> ambiguous; // left unmerged, for manual aliasing
};

/// Rewrites speakers to canonical names. User aliases are applied first
/// and win. Remaining names merge by normalized spelling (canonical surface
/// = most frequent, then earliest), then a one-word name (or a CJK name of
/// two or more characters) merges into the single longer name containing
/// it; containment in several longer names is reported, not merged.
/// Throws ConfigError when a user alias belongs to two canonical names.
MergeResult merge_speakers(const std::vector<UtteranceRecord>& records, const SpeakerAliasMap& user_aliases = {});

/// Chunks most relevant to `speaker`: every chunk holding one of the
/// speaker's utterances, filled up to `k` by hybrid score for a query made of
/// the canonical name and its aliases. Returned in score order.
std::vector<Chunk> select_relevant_chunks(const std::string& speaker, const SpeakerAliasMap& aliases,
                                          const std::vector<UtteranceRecord>& records,
                                          const std::vector<Chunk>& chunks, const retrieval::HybridIndex& index,
                                          std::size_t k);

/// Index over chunks with document id = chunk_id.
retrieval::HybridIndex build_chunk_index(const std::vector<Chunk>& chunks,
                                         std::shared_ptr<const llm::Embedder> embedder,
                                         retrieval::FusionWeights weights = {});

nlohmann::json chunk_to_json(const Chunk& chunk);
Chunk chunk_from_json(const nlohmann::json& j);
nlohmann::json utterance_to_json(const UtteranceRecord& record);
UtteranceRecord utterance_from_json(const nlohmann::json& j);
nlohmann::json aliases_to_json(const SpeakerAliasMap& aliases);
SpeakerAliasMap aliases_from_json(const nlohmann::json& j);

void save_chunks(const std::filesystem::path& path, const std::vector<Chunk>& chunks);
std::vector<Chunk> load_chunks(const std::filesystem::path& path);
/// One JSON object per line: {speaker, text, chunk_id, ordinal}.
void save_utterances(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records);
std::vector<UtteranceRecord> load_utterances(const std::filesystem::path& path);
void save_aliases(const std::filesystem::path& path, const SpeakerAliasMap& aliases);
SpeakerAliasMap load_aliases(const std::filesystem::path& path);

struct IngestOptions {
    std::size_t chunk_size = kDefaultChunkSize;
    std::size_t overlap = kDefaultChunkOverlap;
    SpeakerAliasMap user_aliases;
    std::size_t parallelism = 1;
};

struct BookStore {
    std::string book_id;
    std::vector<Chunk> chunks;
    MergeResult merged;
};

/// Chunks a book, extracts and merges dialogue, and writes chunks.json,
/// utterances.jsonl, aliases.json and ambiguous.json into `out_dir`.
BookStore ingest_book(const std::string& book_id, std::string_view text, const IngestOptions& options,
                      const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                      const std::filesystem::path& out_dir);

/// Reads a store written by ingest_book. Throws LoadError naming the
/// missing or malformed file.
BookStore load_book(const std::filesystem::path& dir);

/// Speakers with at least one utterance, most utterances first.
std::vector<std::pair<std::string, std::size_t>> speaker_counts(const std::vector<UtteranceRecord>& records);

} // namespace rolekit::ingest
