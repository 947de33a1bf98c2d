#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolekit/llm/client.hpp"
#include "rolekit/prompts/prompt_library.hpp"

namespace rolekit::judge {

inline constexpr double kJudgeTemperature = 0.2;
inline constexpr double kJudgeTopP = 0.8;
inline constexpr double kMaxScore = 10.0;

struct DialogueTurn {
    std::string user;
    std::string assistant;
};

struct DialogueSample {
    std::string character_name;
    std::string method_label;
    std::vector<DialogueTurn> turns;

    /// Throws InputError on a blank character or method, or no turns.
    void validate() const;
};

nlohmann::ordered_json sample_to_json(const DialogueSample& sample);
/// InputError on missing fields or wrong types.
DialogueSample sample_from_json(const nlohmann::json& j);

/// Every *.json file in `dir` (sorted by name) holding an array of samples.
std::vector<DialogueSample> load_samples(const std::filesystem::path& dir);

/// Each component lies in [0, 10].
struct JudgeScore {
    double cp = 0.0;
    double ak = 0.0;
    double qc = 0.0;

    friend bool operator==(const JudgeScore&, const JudgeScore&) = default;
};

/// Transcript shown to the judge: "User: ..." and "<character>: ..." lines.
std::string render_dialogue(const DialogueSample& sample);

/// Scores for the first and second dialogue of one judge reply. Missing
/// keys, non-numbers and values outside [0, 10] raise ParseError.
std::pair<JudgeScore, JudgeScore> parse_judge_reply(const std::string& raw);

JudgeScore mean_score(const std::vector<JudgeScore>& scores);

struct PairJudgement {
    JudgeScore a;
    JudgeScore b;
    std::pair<JudgeScore, JudgeScore> forward; // a shown first
    std::pair<JudgeScore, JudgeScore> swapped; // b shown first
};

/// Judges (a, b) and then (b, a); each sample's final score is the mean of
/// its two position scores. Each call gets one repair on a bad reply.
PairJudgement judge_pair(const DialogueSample& a, const DialogueSample& b, const llm::LlmClient& client,
                         const prompts::PromptLibrary& prompts);

struct MethodScores {
    std::string method;
    JudgeScore mean;
    std::size_t judgements = 0; // per-sample scores averaged into `mean`
};

struct CharacterTable {
    std::string character;
    std::vector<MethodScores> methods;
};

struct TournamentReport {
    std::vector<CharacterTable> characters;
    std::vector<MethodScores> overall; // mean of the per-character means
    std::vector<std::string> warnings;
    std::size_t pairs_judged = 0;
    std::size_t pairs_failed = 0;
};

struct TournamentOptions {
    std::size_t parallelism = 4;
};

/// All method pairs judged per character. Characters missing a method, or
/// with a single method, produce warnings; a pair whose judging fails is
/// reported as a warning and left out of the means. InputError on no
/// samples or a duplicate (character, method).
TournamentReport run_tournament(const std::vector<DialogueSample>& samples, const llm::LlmClient& client,
                                const prompts::PromptLibrary& prompts, const TournamentOptions& options = {});

nlohmann::ordered_json report_to_json(const TournamentReport& report);

} // namespace rolekit::judge
