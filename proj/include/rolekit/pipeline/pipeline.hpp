#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolekit/error.hpp"
#include "rolekit/llm/client.hpp"
#include "rolekit/memory/memory_graph.hpp"
#include "rolekit/profile/persona.hpp"
#include "rolekit/prompts/prompt_library.hpp"
#include "rolekit/retrieval/hybrid_index.hpp"

namespace rolekit::pipeline {

enum class MatchingMode { simple, parallel, dynamic };

std::string_view matching_mode_name(MatchingMode mode) noexcept;
/// Throws ConfigError on an unknown name.
MatchingMode parse_matching_mode(std::string_view name);

struct PipelineConfig {
    bool memory_check_enabled = true;
    bool style_before_memory = false;
    bool style_removal_enabled = false;
    bool summarize_after_memory = false;
    MatchingMode matching_mode = MatchingMode::dynamic;
    std::size_t exemplar_k = 5;
    std::size_t memory_k = 8;
    std::optional<std::size_t> max_response_sentences;
    std::size_t parallelism = 4;
    std::string language; // empty = detect from the persona

    /// Throws ConfigError on a broken invariant.
    void validate() const;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

nlohmann::ordered_json config_to_json(const PipelineConfig& config);
/// Missing keys keep their defaults; unknown keys and wrong types throw
/// ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});

enum class SegmentKind { action, sentence };

std::string_view segment_kind_name(SegmentKind kind) noexcept;

/// `leading` is only non-empty on the first segment; joining
/// leading + text + trailing over all segments gives back the input.
struct Segment {
    SegmentKind kind = SegmentKind::sentence;
    std::string text;
    std::size_t position = 0;
    std::string leading;
    std::string trailing;

    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Finds action spans in a reply.
class ActionDetector {
public:
    virtual ~ActionDetector() = default;
    /// Byte ranges [begin, end) of action spans, ascending and disjoint.
    virtual std::vector<std::pair<std::size_t, std::size_t>> find(std::string_view text) const = 0;
};

/// Balanced round brackets, ASCII or full-width, outermost pair only.
/// Unmatched brackets are left as text.
class BracketActionDetector final : public ActionDetector {
public:
    std::vector<std::pair<std::size_t, std::size_t>> find(std::string_view text) const override;
};

const ActionDetector& default_action_detector();

/// Throws InputError on blank text.
std::vector<Segment> segment_response(std::string_view text,
                                      const ActionDetector& detector = default_action_detector());
std::string join_segments(const std::vector<Segment>& segments);

struct HistoryEntry {
    std::string user;
    std::string assistant;
    std::string trace_id;

    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct SegmentRewrite {
    std::size_t position = 0;
    std::vector<std::string> exemplars;
    std::string rewritten;
};

struct StyleRemoval {
    std::string before;
    std::string after;
    bool caution = false;
};

struct PipelineTrace {
    std::string trace_id;
    std::string user_message;
    std::string language;
    PipelineConfig config;
    std::vector<std::string> stages; // execution order
    std::string styleless;
    std::optional<std::vector<std::string>> rewrite_keywords;
    bool keywords_fallback = false;
    std::optional<std::vector<memory::MemoryHit>> memory_hits;
    std::optional<std::string> memory_checked;
    std::optional<std::string> summarized;
    std::optional<StyleRemoval> style_removal;
    std::vector<Segment> segments;
    std::vector<SegmentRewrite> per_segment;
    std::string stylized;
    std::string reply;
    std::map<std::string, std::size_t> llm_calls; // stage -> chat calls
    std::vector<std::string> notes;
    bool failed = false;
    std::string error;

    std::size_t total_llm_calls() const;
};

nlohmann::ordered_json trace_to_json(const PipelineTrace& trace);
PipelineTrace trace_from_json(const nlohmann::json& j);

/// A failed turn; carries the partial trace marked failed.
class TurnError : public Error {
public:
    TurnError(const Error& cause, PipelineTrace partial);

    const PipelineTrace& partial_trace() const noexcept { return partial_; }

private:
    PipelineTrace partial_;
};

/// Everything a turn reads. `graph` may be null only when memory checking
/// is disabled; `utterance_index` may be null (no exemplars).
struct PersonaContext {
    std::shared_ptr<const profile::PersonaBundle> bundle;
    std::shared_ptr<const memory::MemoryGraph> graph;
    std::shared_ptr<const retrieval::HybridIndex> utterance_index;
};

class Pipeline {
public:
    Pipeline(std::shared_ptr<const llm::LlmClient> client, std::shared_ptr<const prompts::PromptLibrary> prompts);

    std::string stage1_styleless(const PersonaContext& persona, const std::vector<HistoryEntry>& history,
                                 const std::string& user_message, const std::string& language,
                                 const llm::LlmClient& client) const;

    struct Keywords {
        std::vector<std::string> keywords;
        bool fallback = false;
    };
    Keywords stage2_rewrite_query(const PersonaContext& persona, const std::string& styleless,
                                  const std::string& user_message, const std::string& language,
                                  const llm::LlmClient& client) const;

    struct MemoryCheck {
        std::vector<memory::MemoryHit> hits;
        std::string checked;
        std::optional<std::string> summarized;
        std::vector<std::string> notes;
    };
    MemoryCheck stage2_memory_check(const PersonaContext& persona, const std::string& draft,
                                    const std::vector<std::string>& keywords, const std::string& user_message,
                                    const PipelineConfig& config, const std::string& language,
                                    const llm::LlmClient& client) const;

    StyleRemoval remove_style(const std::string& text, const std::string& language,
                              const llm::LlmClient& client) const;

    struct Stylized {
        std::vector<Segment> segments;
        std::vector<SegmentRewrite> per_segment;
        std::string text;
        std::vector<std::string> notes;
    };
    Stylized stage3_stylize(const PersonaContext& persona, const std::string& draft, const PipelineConfig& config,
                            const std::string& language, const llm::LlmClient& client) const;

    /// Runs the configured stages. On success appends to `history` and
    /// returns the trace; on failure throws TurnError and leaves `history`
    /// untouched.
    PipelineTrace run_turn(const PersonaContext& persona, std::vector<HistoryEntry>& history,
                           const std::string& user_message, const PipelineConfig& config,
                           const std::string& trace_id = "") const;

    const llm::LlmClient& client() const noexcept { return *client_; }
    const prompts::PromptLibrary& prompts() const noexcept { return *prompts_; }

private:
    std::shared_ptr<const llm::LlmClient> client_;
    std::shared_ptr<const prompts::PromptLibrary> prompts_;
};

/// Language of a persona's prompts: the majority script of its utterances
/// and synthesized personality.
std::string persona_language(const profile::PersonaBundle& bundle);

/// Labeled "Key: value" lines for the twelve background attributes.
std::string render_background(const profile::BackgroundProfile& background);
/// "class: w1, w2, ..." lines, at most `per_class` words per class.
std::string render_common_words(const profile::StyleProfile& style, std::size_t per_class = 10);

/// Noun-phrase style keywords used when query rewriting fails: runs of
/// capitalized words, then remaining nouns, at most 10.
std::vector<std::string> fallback_keywords(const std::string& text);

} // namespace rolekit::pipeline
