#include <gtest/gtest.h>

#include <fstream>

#include "rolekit/error.hpp"
#include "rolekit/judge/judge.hpp"
#include "support/scripted.hpp"

using namespace rolekit;
using namespace rolekit::judge;

namespace {

const prompts::PromptLibrary& library() {
    static const auto lib = prompts::PromptLibrary::builtin();
    return lib;
}

DialogueSample sample(const std::string& character, const std::string& method, const std::string& reply) {
    return {character, method, {{"Hello there.", reply}, {"And then?", reply + " Again."}}};
}

std::string reply_json(double c1, double a1, double q1, double c2, double a2, double q2) {
    nlohmann::json j;
    j["dialogue_1"] = {{"cp", c1}, {"ak", a1}, {"qc", q1}};
    j["dialogue_2"] = {{"cp", c2}, {"ak", a2}, {"qc", q2}};
    return j.dump();
}

std::string between(const std::string& s, const std::string& open, const std::string& close) {
    const auto a = s.find(open);
    const auto b = s.find(close, a);
    return s.substr(a + open.size(), b - a - open.size());
}

// Scores each dialogue by a per-method base value looked up from the
// transcript, plus `first_bonus` for whichever dialogue is shown first.
std::shared_ptr<llm::LlmClient> base_judge(std::map<std::string, double> base, double first_bonus) {
    auto model = std::make_shared<llm::CallbackChatModel>([=](const llm::ChatRequest& r) {
        const auto& user = r.messages.back().content;
        auto score = [&](const std::string& transcript) {
            for (const auto& [marker, value] : base) {
                if (transcript.find(marker) != std::string::npos) {
                    return value;
                }
            }
            return 0.0;
        };
        const double one = score(between(user, "<dialogue_1>", "</dialogue_1>")) + first_bonus;
        const double two = score(between(user, "<dialogue_2>", "</dialogue_2>"));
        return reply_json(one, one - 1, one - 2, two, two - 1, two - 2);
    });
    return std::make_shared<llm::LlmClient>(model);
}

} // namespace

TEST(JudgeParse, AcceptsBoundsAndRejectsOutOfRange) {
    const auto [a, b] = parse_judge_reply("Scores:\n```json\n" + reply_json(10, 0, 5.5, 1, 2, 3) + "\n```");
    EXPECT_EQ(a, (JudgeScore{10, 0, 5.5}));
    EXPECT_EQ(b, (JudgeScore{1, 2, 3}));
    EXPECT_THROW(parse_judge_reply(reply_json(10.5, 0, 0, 1, 1, 1)), ParseError);
    EXPECT_THROW(parse_judge_reply(reply_json(1, -0.1, 0, 1, 1, 1)), ParseError);
    EXPECT_THROW(parse_judge_reply(R"({"dialogue_1":{"cp":1,"ak":1,"qc":1}})"), ParseError);
    EXPECT_THROW(parse_judge_reply(R"({"dialogue_1":{"cp":"8","ak":1,"qc":1},"dialogue_2":{"cp":1,"ak":1,"qc":1}})"),
                 ParseError);
    EXPECT_THROW(parse_judge_reply("no scores at all"), ParseError);
}

TEST(JudgePair, HandArithmeticOfMirroring) {
    // (a, b) scored 8 / 6, then (b, a) scored 5 / 7.
    auto client = testutil::scripted_client({
        {"[task:judge]", llm::MatchKind::substring, reply_json(8, 8, 8, 6, 6, 6), 1},
        {"[task:judge]", llm::MatchKind::substring, reply_json(5, 5, 5, 7, 7, 7), 1},
    });
    const auto a = sample("Albus Dumbledore", "ours", "Alpha.");
    const auto b = sample("Albus Dumbledore", "baseline", "Beta.");
    const auto out = judge_pair(a, b, *client, library());
    EXPECT_DOUBLE_EQ(out.a.cp, (8.0 + 7.0) / 2.0);
    EXPECT_DOUBLE_EQ(out.b.cp, (6.0 + 5.0) / 2.0);
    EXPECT_EQ(out.a, (JudgeScore{7.5, 7.5, 7.5}));
    EXPECT_EQ(out.b, (JudgeScore{5.5, 5.5, 5.5}));

    const auto records = client->log()->records();
    ASSERT_EQ(records.size(), 2u);
    for (const auto& r : records) {
        EXPECT_EQ(r.temperature, 0.2);
        EXPECT_EQ(r.top_p, 0.8);
    }
    EXPECT_LT(records[0].prompt.find("Alpha."), records[0].prompt.find("Beta."));
    EXPECT_GT(records[1].prompt.find("Alpha."), records[1].prompt.find("Beta."));
}

TEST(JudgePair, WireRequestCarriesSampling) {
    llm::ChatRequest seen;
    auto model = std::make_shared<llm::CallbackChatModel>([&](const llm::ChatRequest& r) {
        seen = r;
        return reply_json(5, 5, 5, 5, 5, 5);
    });
    llm::LlmClient client(model);
    judge_pair(sample("X", "m1", "a"), sample("X", "m2", "b"), client, library());
    const auto wire = llm::to_wire_json(seen, "judge-model");
    EXPECT_EQ(wire.at("temperature").get<double>(), 0.2);
    EXPECT_EQ(wire.at("top_p").get<double>(), 0.8);
}

TEST(JudgePair, PositionBonusCancels) {
    auto client = base_judge({{"Alpha.", 6.0}, {"Beta.", 4.0}}, 1.0);
    const auto a = sample("C", "m1", "Alpha.");
    const auto b = sample("C", "m2", "Beta.");
    const auto ab = judge_pair(a, b, *client, library());
    const auto ba = judge_pair(b, a, *client, library());
    EXPECT_EQ(ab.a, ba.b);
    EXPECT_EQ(ab.b, ba.a);
    EXPECT_DOUBLE_EQ(ab.a.cp, 6.5);
    EXPECT_DOUBLE_EQ(ab.b.cp, 4.5);
    EXPECT_DOUBLE_EQ(ab.a.cp - ab.b.cp, 2.0);
}

TEST(JudgePair, IdenticalInputsScoreEqually) {
    auto client = base_judge({{"Same.", 7.0}}, 2.0);
    const auto a = sample("C", "m1", "Same.");
    const auto out = judge_pair(a, a, *client, library());
    EXPECT_EQ(out.a, out.b);
}

TEST(JudgePair, OneRepairThenFailure) {
    auto client = testutil::scripted_client({
        {"[task:judge.repair]", llm::MatchKind::substring, reply_json(9, 9, 9, 1, 1, 11), std::nullopt},
        {"[task:judge]", llm::MatchKind::substring, R"({"dialogue_1":{"cp":11,"ak":1,"qc":1},"dialogue_2":{}})",
         std::nullopt},
    });
    const auto a = sample("C", "m1", "x");
    const auto b = sample("C", "m2", "y");
    EXPECT_THROW(judge_pair(a, b, *client, library()), ParseError);
    EXPECT_EQ(testutil::tasks(*client->log()),
              (std::vector<std::string>{"judge", "judge.repair"}));
}

TEST(JudgePair, RejectsMismatchedOrEmptySamples) {
    auto client = base_judge({}, 0.0);
    EXPECT_THROW(judge_pair(sample("A", "m", "x"), sample("B", "m2", "y"), *client, library()), InputError);
    DialogueSample empty{"A", "m", {}};
    EXPECT_THROW(judge_pair(empty, sample("A", "m2", "y"), *client, library()), InputError);
    EXPECT_EQ(client->log()->size(), 0u);
}

TEST(Tournament, TwoMethodsOneCharacter) {
    auto client = base_judge({{"Alpha.", 8.0}, {"Beta.", 5.0}}, 0.0);
    const auto report = run_tournament({sample("C", "ours", "Alpha."), sample("C", "base", "Beta.")}, *client,
                                       library());
    EXPECT_EQ(client->log()->size(), 2u);
    EXPECT_EQ(report.pairs_judged, 1u);
    ASSERT_EQ(report.overall.size(), 2u);
    EXPECT_EQ(report.overall[0].method, "ours");
    EXPECT_EQ(report.overall[0].mean, (JudgeScore{8, 7, 6}));
    EXPECT_EQ(report.overall[1].mean, (JudgeScore{5, 4, 3}));
    EXPECT_TRUE(report.warnings.empty());
}

TEST(Tournament, MeansMatchHandAverages) {
    // Three methods, two characters; method scores differ per character.
    auto client = base_judge({{"A1.", 9.0}, {"B1.", 6.0}, {"C1.", 3.0}, {"A2.", 7.0}, {"B2.", 8.0}, {"C2.", 4.0}},
                             1.0);
    std::vector<DialogueSample> samples = {
        sample("P", "a", "A1."), sample("P", "b", "B1."), sample("P", "c", "C1."),
        sample("Q", "a", "A2."), sample("Q", "b", "B2."), sample("Q", "c", "C2."),
    };
    const auto report = run_tournament(samples, *client, library(), {2});
    EXPECT_EQ(report.pairs_judged, 6u);
    EXPECT_EQ(client->log()->size(), 12u);
    // Every pair cancels the bonus to base + 0.5, so each method's
    // per-character mean is base + 0.5 and the overall mean averages the
    // two characters.
    ASSERT_EQ(report.characters.size(), 2u);
    EXPECT_DOUBLE_EQ(report.characters[0].methods[0].mean.cp, 9.5);
    EXPECT_EQ(report.characters[0].methods[0].judgements, 2u);
    EXPECT_DOUBLE_EQ(report.overall[0].mean.cp, (9.5 + 7.5) / 2.0);
    EXPECT_DOUBLE_EQ(report.overall[1].mean.ak, (5.5 + 7.5) / 2.0);
    EXPECT_DOUBLE_EQ(report.overall[2].mean.qc, (1.5 + 2.5) / 2.0);

    const auto j = report_to_json(report);
    EXPECT_EQ(j.at("metrics").dump(), R"(["cp","ak","qc"])");
    EXPECT_EQ(j.at("overall").at(0).at("method"), "a");
    EXPECT_DOUBLE_EQ(j.at("overall").at(0).at("cp").get<double>(), 8.5);
}

TEST(Tournament, MissingCoverageWarnsAndFailedPairsAreReported) {
    auto model = std::make_shared<llm::CallbackChatModel>([](const llm::ChatRequest& r) -> std::string {
        if (llm::render_prompt(r).find("Broken.") != std::string::npos) {
            return "garbage";
        }
        return reply_json(5, 5, 5, 5, 5, 5);
    });
    llm::LlmClient client(model);
    std::vector<DialogueSample> samples = {
        sample("P", "a", "x"), sample("P", "b", "y"), sample("Q", "a", "z"),
        sample("R", "a", "Broken."), sample("R", "b", "w"),
    };
    const auto report = run_tournament(samples, client, library(), {1});
    EXPECT_EQ(report.pairs_judged, 1u);
    EXPECT_EQ(report.pairs_failed, 1u);
    ASSERT_EQ(report.warnings.size(), 3u);
    EXPECT_EQ(report.warnings[0], "Q: no sample for method b");
    EXPECT_EQ(report.warnings[1], "Q: fewer than two methods, nothing to compare");
    EXPECT_NE(report.warnings[2].find("R: a vs b failed (E_PARSE"), std::string::npos);
}

TEST(Tournament, InputErrors) {
    auto client = base_judge({}, 0.0);
    EXPECT_THROW(run_tournament({}, *client, library()), InputError);
    EXPECT_THROW(run_tournament({sample("P", "a", "x"), sample("P", "a", "y")}, *client, library()), InputError);
}

TEST(Samples, LoadDirectory) {
    const auto dir = std::filesystem::temp_directory_path() / "rolekit_judge_samples";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto arr = nlohmann::json::array({sample_to_json(sample("P", "a", "x")), sample_to_json(sample("P", "b", "y"))});
    std::ofstream(dir / "p.json") << arr.dump(2);
    std::ofstream(dir / "notes.txt") << "ignored";
    const auto loaded = load_samples(dir);
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[1].method_label, "b");
    EXPECT_EQ(render_dialogue(loaded[0]), "User: Hello there.\nP: x\nUser: And then?\nP: x Again.");
    std::ofstream(dir / "q.json") << R"([{"character_name":"Q","method_label":"a","turns":[]}])";
    EXPECT_THROW(load_samples(dir), InputError);
    EXPECT_THROW(load_samples(dir / "missing"), InputError);
    std::filesystem::remove_all(dir);
}
