#include "rolekit/judge/judge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>

#include "rolekit/error.hpp"
#include "rolekit/llm/json_reply.hpp"
#include "rolekit/llm/language.hpp"
#include "rolekit/text/utf8.hpp"
#include "rolekit/util/parallel.hpp"

namespace rolekit::judge {

namespace {

JudgeScore score_from_json(const nlohmann::json& j, const char* which) {
    if (!j.is_object()) {
        throw ParseError(std::string("judge reply: ") + which + " must be an object", j.dump());
    }
    JudgeScore s;
    for (auto [key, out] : {std::pair<const char*, double*>{"cp", &s.cp}, {"ak", &s.ak}, {"qc", &s.qc}}) {
        if (!j.contains(key) || !j.at(key).is_number()) {
            throw ParseError(std::string("judge reply: ") + which + "." + key + " must be a number", j.dump());
        }
        const double v = j.at(key).get<double>();
        if (!std::isfinite(v) || v < 0.0 || v > kMaxScore) {
            throw ParseError(std::string("judge reply: ") + which + "." + key + " = " + j.at(key).dump() +
                                 " is outside [0, 10]",
                             j.dump());
        }
        *out = v;
    }
    return s;
}

JudgeScore average(const JudgeScore& x, const JudgeScore& y) {
    return {(x.cp + y.cp) / 2.0, (x.ak + y.ak) / 2.0, (x.qc + y.qc) / 2.0};
}

nlohmann::ordered_json method_json(const MethodScores& m) {
    nlohmann::ordered_json j;
    j["method"] = m.method;
    j["cp"] = m.mean.cp;
    j["ak"] = m.mean.ak;
    j["qc"] = m.mean.qc;
    j["judgements"] = m.judgements;
    return j;
}

std::pair<JudgeScore, JudgeScore> judge_once(const DialogueSample& first, const DialogueSample& second,
                                             const llm::LlmClient& client, const prompts::PromptLibrary& prompts) {
    const auto one = render_dialogue(first);
    const auto two = render_dialogue(second);
    const auto language = llm::select_prompt_language(one + two);
    auto req = prompts.request("judge", language,
                               {{"character", first.character_name}, {"sample_1", one}, {"sample_2", two}});
    req.temperature = kJudgeTemperature;
    req.top_p = kJudgeTopP;
    return llm::complete_structured(client, req, parse_judge_reply,
                                    [&](const std::string& bad, const std::string& reason) {
                                        return prompts.repair_request(req, bad, reason, language);
                                    });
}

} // namespace

void DialogueSample::validate() const {
    if (text::trim(character_name).empty()) {
        throw InputError("dialogue sample needs a character_name");
    }
    if (text::trim(method_label).empty()) {
        throw InputError("dialogue sample for " + character_name + " needs a method_label");
    }
    if (turns.empty()) {
        throw InputError("dialogue sample " + character_name + "/" + method_label + " has no turns");
    }
}

nlohmann::ordered_json sample_to_json(const DialogueSample& s) {
    nlohmann::ordered_json j;
    j["character_name"] = s.character_name;
    j["method_label"] = s.method_label;
    auto turns = nlohmann::ordered_json::array();
    for (const auto& t : s.turns) {
        turns.push_back({{"user", t.user}, {"assistant", t.assistant}});
    }
    j["turns"] = turns;
    return j;
}

DialogueSample sample_from_json(const nlohmann::json& j) {
    DialogueSample s;
    try {
        s.character_name = j.at("character_name").get<std::string>();
        s.method_label = j.at("method_label").get<std::string>();
        for (const auto& t : j.at("turns")) {
            s.turns.push_back({t.at("user").get<std::string>(), t.at("assistant").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed dialogue sample: ") + e.what());
    }
    s.validate();
    return s;
}

std::vector<DialogueSample> load_samples(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw InputError("sample directory " + dir.string() + " does not exist");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<DialogueSample> out;
    for (const auto& file : files) {
        std::ifstream in(file);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_array()) {
            throw InputError(file.string() + ": expected a JSON array of dialogue samples");
        }
        for (std::size_t i = 0; i < j.size(); ++i) {
            try {
                out.push_back(sample_from_json(j[i]));
            } catch (const InputError& e) {
                throw InputError(file.string() + "[" + std::to_string(i) + "]: " + e.what());
            }
        }
    }
    return out;
}

std::string render_dialogue(const DialogueSample& sample) {
    std::string out;
    for (const auto& t : sample.turns) {
        out += "User: " + t.user + "\n";
        out += sample.character_name + ": " + t.assistant + "\n";
    }
    if (!out.empty()) {
        out.pop_back();
    }
    return out;
}

std::pair<JudgeScore, JudgeScore> parse_judge_reply(const std::string& raw) {
    const auto j = llm::parse_json_reply(raw);
    if (!j.is_object() || !j.contains("dialogue_1") || !j.contains("dialogue_2")) {
        throw ParseError("judge reply must hold dialogue_1 and dialogue_2", raw);
    }
    try {
        return {score_from_json(j.at("dialogue_1"), "dialogue_1"), score_from_json(j.at("dialogue_2"), "dialogue_2")};
    } catch (const ParseError& e) {
        throw ParseError(e.what(), raw);
    }
}

JudgeScore mean_score(const std::vector<JudgeScore>& scores) {
    JudgeScore m;
    if (scores.empty()) {
        return m;
    }
    for (const auto& s : scores) {
        m.cp += s.cp;
        m.ak += s.ak;
        m.qc += s.qc;
    }
    const double n = static_cast<double>(scores.size());
    return {m.cp / n, m.ak / n, m.qc / n};
}

PairJudgement judge_pair(const DialogueSample& a, const DialogueSample& b, const llm::LlmClient& client,
                         const prompts::PromptLibrary& prompts) {
    a.validate();
    b.validate();
    if (a.character_name != b.character_name) {
        throw InputError("cannot judge " + a.character_name + " against " + b.character_name);
    }
    PairJudgement out;
    out.forward = judge_once(a, b, client, prompts);
    out.swapped = judge_once(b, a, client, prompts);
    out.a = average(out.forward.first, out.swapped.second);
    out.b = average(out.forward.second, out.swapped.first);
    return out;
}

TournamentReport run_tournament(const std::vector<DialogueSample>& samples, const llm::LlmClient& client,
                                const prompts::PromptLibrary& prompts, const TournamentOptions& options) {
    if (samples.empty()) {
        throw InputError("no dialogue samples to judge");
    }
    std::vector<std::string> methods;
    std::vector<std::string> characters;
    std::map<std::string, std::map<std::string, const DialogueSample*>> by_character;
    for (const auto& s : samples) {
        s.validate();
        if (std::find(methods.begin(), methods.end(), s.method_label) == methods.end()) {
            methods.push_back(s.method_label);
        }
        if (!by_character.count(s.character_name)) {
            characters.push_back(s.character_name);
        }
        auto& slot = by_character[s.character_name][s.method_label];
        if (slot) {
            throw InputError("duplicate sample for " + s.character_name + "/" + s.method_label);
        }
        slot = &s;
    }

    TournamentReport report;
    struct Job {
        std::string character;
        const DialogueSample* a;
        const DialogueSample* b;
    };
    std::vector<Job> jobs;
    for (const auto& character : characters) {
        const auto& present = by_character.at(character);
        for (const auto& m : methods) {
            if (!present.count(m)) {
                report.warnings.push_back(character + ": no sample for method " + m);
            }
        }
        std::vector<const DialogueSample*> ordered;
        for (const auto& m : methods) {
            if (const auto it = present.find(m); it != present.end()) {
                ordered.push_back(it->second);
            }
        }
        if (ordered.size() < 2) {
            report.warnings.push_back(character + ": fewer than two methods, nothing to compare");
        }
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            for (std::size_t j = i + 1; j < ordered.size(); ++j) {
                jobs.push_back({character, ordered[i], ordered[j]});
            }
        }
    }

    struct Outcome {
        std::optional<PairJudgement> judgement;
        std::string error;
    };
    const auto outcomes = util::parallel_map(jobs.size(), std::max<std::size_t>(1, options.parallelism),
                                             [&](std::size_t i) -> Outcome {
                                                 try {
                                                     return {judge_pair(*jobs[i].a, *jobs[i].b, client, prompts), {}};
                                                 } catch (const Error& e) {
                                                     return {std::nullopt, std::string(error_code_name(e.code())) +
                                                                               ": " + e.what()};
                                                 }
                                             });

    std::map<std::string, std::map<std::string, std::vector<JudgeScore>>> collected;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& job = jobs[i];
        if (!outcomes[i].judgement) {
            ++report.pairs_failed;
            report.warnings.push_back(job.character + ": " + job.a->method_label + " vs " + job.b->method_label +
                                      " failed (" + outcomes[i].error + ")");
            continue;
        }
        ++report.pairs_judged;
        collected[job.character][job.a->method_label].push_back(outcomes[i].judgement->a);
        collected[job.character][job.b->method_label].push_back(outcomes[i].judgement->b);
    }

    std::map<std::string, std::vector<JudgeScore>> per_method;
    for (const auto& character : characters) {
        CharacterTable table{character, {}};
        for (const auto& m : methods) {
            const auto c = collected.find(character);
            if (c == collected.end() || !c->second.count(m)) {
                continue;
            }
            const auto& scores = c->second.at(m);
            table.methods.push_back({m, mean_score(scores), scores.size()});
            per_method[m].push_back(table.methods.back().mean);
        }
        report.characters.push_back(std::move(table));
    }
    for (const auto& m : methods) {
        if (const auto it = per_method.find(m); it != per_method.end()) {
            report.overall.push_back({m, mean_score(it->second), it->second.size()});
        } else {
            report.warnings.push_back("method " + m + " has no judged comparisons");
        }
    }
    return report;
}

nlohmann::ordered_json report_to_json(const TournamentReport& report) {
    nlohmann::ordered_json j;
    j["metrics"] = {"cp", "ak", "qc"};
    j["max_score"] = kMaxScore;
    auto overall = nlohmann::ordered_json::array();
    for (const auto& m : report.overall) {
        auto row = method_json(m);
        row["characters"] = row["judgements"];
        row.erase("judgements");
        overall.push_back(row);
    }
    j["overall"] = overall;
    auto characters = nlohmann::ordered_json::array();
    for (const auto& c : report.characters) {
        nlohmann::ordered_json cj;
        cj["character"] = c.character;
        auto rows = nlohmann::ordered_json::array();
        for (const auto& m : c.methods) {
            rows.push_back(method_json(m));
        }
        cj["methods"] = rows;
        characters.push_back(cj);
    }
    j["characters"] = characters;
    j["pairs_judged"] = report.pairs_judged;
    j["pairs_failed"] = report.pairs_failed;
    j["warnings"] = report.warnings;
    return j;
}

} // namespace rolekit::judge
