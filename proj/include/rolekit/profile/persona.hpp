#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolekit/ingest/corpus.hpp"
#include "rolekit/llm/client.hpp"
#include "rolekit/prompts/prompt_library.hpp"
#include "rolekit/retrieval/hybrid_index.hpp"

namespace rolekit::profile {

inline constexpr std::array<std::string_view, 12> kBackgroundKeys = {
    "name",           "gender",           "age",                "ethnicity",
    "identity",       "occupation",       "physical_appearance", "health_status",
    "family_background", "historical_context", "key_possessions",   "interests_hobbies",
};

inline constexpr std::string_view kUnknown = "unknown";

/// Chunks per background extraction round before attribute summarization.
inline constexpr std::size_t kBackgroundRoundSize = 5;

struct PersonalityProfile {
    std::vector<std::pair<std::size_t, std::string>> per_chunk_traits;
    std::string synthesized;

    friend bool operator==(const PersonalityProfile&, const PersonalityProfile&) = default;
};

/// Always holds exactly the twelve background keys.
class BackgroundProfile {
public:
    BackgroundProfile();

    const std::string& get(std::string_view key) const;
    /// Throws InputError for keys outside the fixed attribute list.
    void set(std::string_view key, std::string value);
    const std::map<std::string, std::string>& attributes() const noexcept { return values_; }

    friend bool operator==(const BackgroundProfile&, const BackgroundProfile&) = default;

private:
    std::map<std::string, std::string> values_;
};

struct WordCount {
    std::string word;
    std::size_t count = 0;

    friend bool operator==(const WordCount&, const WordCount&) = default;
};

inline constexpr std::array<std::string_view, 12> kPosClasses = {
    "noun",        "verb",        "adjective", "adverb",   "pronoun", "determiner",
    "preposition", "conjunction", "interjection", "particle", "numeral", "other",
};

struct StyleProfile {
    std::string preferences;
    // part of speech -> words, count descending then word ascending
    std::map<std::string, std::vector<WordCount>> common_words;

    friend bool operator==(const StyleProfile&, const StyleProfile&) = default;
};

/// Assigns one part-of-speech class from kPosClasses to a lexical term.
class PosTagger {
public:
    virtual ~PosTagger() = default;
    virtual std::string_view tag(std::string_view word) const = 0;
};

/// Closed-class lexicon (English and common Chinese function words), a
/// small open-class lexicon, and English suffix rules; anything else is
/// "other".
class LexiconTagger final : public PosTagger {
public:
    std::string_view tag(std::string_view word) const override;
};

const PosTagger& default_tagger();

struct PersonaBundle {
    std::string canonical_name;
    std::string source_book;
    PersonalityProfile personality;
    BackgroundProfile background;
    StyleProfile style;
    std::vector<ingest::UtteranceRecord> utterances;
    ingest::SpeakerAliasMap alias_map;

    /// Throws InputError describing the first broken invariant.
    void validate() const;

    friend bool operator==(const PersonaBundle&, const PersonaBundle&) = default;
};

struct ProfileOptions {
    std::size_t relevant_chunks = 20;
    std::size_t style_sample = 50;
    std::size_t common_words_per_class = 20;
    std::size_t parallelism = 1;
    std::string language; // empty = detect from the chunks
};

PersonalityProfile extract_personality(const std::string& speaker, const std::vector<ingest::Chunk>& chunks,
                                       const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                                       const ProfileOptions& options = {});

/// Chunks are read in rounds of five; after each round (and a final
/// partial one) every attribute that gained values is merged by one
/// background_summary call folding in the previous summary.
BackgroundProfile extract_background(const std::string& speaker, const std::vector<ingest::Chunk>& chunks,
                                     const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                                     const ProfileOptions& options = {});

/// Indices of at most `sample` items spread evenly over `n`: floor(i*n/sample).
std::vector<std::size_t> stride_sample(std::size_t n, std::size_t sample);

/// Exact term counts over all texts, grouped by part of speech, top
/// `per_class` per class.
std::map<std::string, std::vector<WordCount>> count_common_words(const std::vector<std::string>& texts,
                                                                 std::size_t per_class,
                                                                 const PosTagger& tagger = default_tagger());

StyleProfile extract_style(const std::string& speaker, const std::vector<ingest::UtteranceRecord>& utterances,
                           const llm::LlmClient& client, const prompts::PromptLibrary& prompts,
                           const ProfileOptions& options = {});

/// Full persona extraction for one canonical speaker of an ingested book.
PersonaBundle build_persona(const std::string& speaker, const ingest::BookStore& book,
                            const retrieval::HybridIndex& chunk_index, const llm::LlmClient& client,
                            const prompts::PromptLibrary& prompts, const ProfileOptions& options = {});

nlohmann::ordered_json profile_to_json(const PersonaBundle& bundle);
nlohmann::ordered_json common_words_to_json(const StyleProfile& style);

/// profile.json, common_words.json, utterances.jsonl and aliases.json.
void save_bundle(const PersonaBundle& bundle, const std::filesystem::path& dir);
/// Throws LoadError naming every missing file, or the malformed one.
PersonaBundle load_bundle(const std::filesystem::path& dir);

/// Applies a partial profile.json-shaped edit ({personality: {synthesized},
/// background: {...}, style: {preferences, common_words}}) and validates.
PersonaBundle apply_edit(PersonaBundle bundle, const nlohmann::json& edit);

/// Utterance index stored under <dir>/utterance_index; rebuilt when the
/// stored documents no longer match the bundle's utterances. Returns
/// nullptr when the persona has no utterances.
std::shared_ptr<const retrieval::HybridIndex> load_or_build_utterance_index(
    const PersonaBundle& bundle, const std::filesystem::path& dir, std::shared_ptr<const llm::Embedder> embedder);

} // namespace rolekit::profile
