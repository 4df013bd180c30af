#include <gtest/gtest.h>

#include "agenteval/errors.hpp"
#include "agenteval/persistence.hpp"
#include "agenteval/sft.hpp"
#include "test_util.hpp"

using namespace agenteval;
using namespace agenteval::testing;

namespace {

std::vector<HumanLabel> sft_finals() {
    std::vector<LedgerEntry> entries;
    for (const auto& doc : read_jsonl(fixture("sft_labels.jsonl"))) entries.push_back(ledger_entry_from_json(doc));
    std::vector<HumanLabel> out;
    for (const auto& [key, label] : resolve_ledger(entries).final_labels) out.push_back(label);
    return out;
}

}  // namespace

// Every exported record's target parses back to exactly the payload of the
// final label it came from.
TEST(Sft, ThirtyRecordRoundTrip) {
    const EvaluationConfig config;
    const auto finals = sft_finals();
    ASSERT_EQ(finals.size(), 30u);
    auto exported = export_sft(demo_samples(), finals, config, TemplateRegistry::defaults());
    ASSERT_EQ(exported.records.size(), 30u);
    EXPECT_EQ(exported.unmatched_labels, 0u);
    EXPECT_EQ(exported.candidates, 20u * 9u);
    EXPECT_EQ(exported.skipped.size(), exported.candidates - 30u);

    std::map<LabelKey, HumanLabel> by_key;
    for (const auto& l : finals) by_key.emplace(l.key(), l);
    std::size_t exact = 0;
    for (const auto& record : exported.records) {
        const LabelKey key{record["sample_id"], record["stage"], target_from_json(record["item"])};
        ASSERT_TRUE(by_key.contains(key)) << to_string(key);
        if (payload_from_sft_record(record, config) == by_key.at(key).payload) ++exact;
        EXPECT_EQ(record["format_version"], 1);
        EXPECT_FALSE(record["prompt"].get<std::string>().empty());
    }
    EXPECT_EQ(exact, 30u);
}

TEST(Sft, PromptIsTheOneTheModelSees) {
    const EvaluationConfig config;
    const auto templates = TemplateRegistry::defaults();
    auto exported = export_sft(demo_samples(), sft_finals(), config, templates);
    PromptBuilder builder(templates, config);
    const auto samples = demo_samples();
    for (const auto& record : exported.records) {
        if (record["agent"] != "experience_single") continue;
        const auto& sample = *std::find_if(samples.begin(), samples.end(),
                                           [&](const auto& s) { return s.sample_id == record["sample_id"]; });
        EXPECT_EQ(record["prompt"], builder.build_experience_single_prompt(sample.responses.at(record["item"])).body);
    }
}

TEST(Sft, LabelsWithoutScoresAreSkippedWithAReason) {
    const auto sample = demo_samples().at(0);
    HumanLabel no_scores{sample.sample_id, 1, Target::single("atlas"),
                         InteractionLabel{ScqsLabel::from_level(2), std::nullopt, ""}, "h", true};
    auto exported = export_sft({sample}, {no_scores}, EvaluationConfig{}, TemplateRegistry::defaults());
    EXPECT_TRUE(exported.records.empty());
    auto it = std::find_if(exported.skipped.begin(), exported.skipped.end(),
                           [&](const SftSkip& s) { return s.key == no_scores.key(); });
    ASSERT_NE(it, exported.skipped.end());
    EXPECT_NE(it->reason.find("scores"), std::string::npos);
    EXPECT_THROW(export_sft({sample}, {no_scores, no_scores}, EvaluationConfig{}, TemplateRegistry::defaults()),
                 ValidationError);
}

TEST(Sft, PreferenceItemsOnRequest) {
    const auto sample = demo_samples().at(0);
    HumanLabel pref{sample.sample_id, 3, Target::pair("atlas", "cobalt"), PreferenceLabel{Preference::kB, "B reads better"}, "h", true};
    EXPECT_TRUE(export_sft({sample}, {pref}, EvaluationConfig{}, TemplateRegistry::defaults()).records.empty());
    auto with = export_sft({sample}, {pref}, EvaluationConfig{}, TemplateRegistry::defaults(), {true});
    ASSERT_EQ(with.records.size(), 1u);
    EXPECT_EQ(with.records[0]["agent"], "experience_pair");
    EXPECT_EQ(payload_from_sft_record(with.records[0], EvaluationConfig{}), pref.payload);
}

// Property: sft_target and payload_from_target are inverse for random
// payloads of every kind.
TEST(SftProperty, TargetsParseBackToTheirPayload) {
    const EvaluationConfig config;
    const auto& task = config.tasks.at("life");
    std::vector<std::string> errors, causes;
    for (const auto& t : config.error_tags.tags()) errors.push_back(t.tag_id);
    for (const auto& t : config.cause_tags.tags()) causes.push_back(t.tag_id);
    std::mt19937_64 rng(test_seed(31));
    auto text = [&] { return std::string("note ") + std::to_string(rng() % 1000) + (rng() % 2 ? " \"q\" {x}" : ""); };
    for (int i = 0; i < 500; ++i) {
        std::set<std::string> e, c;
        for (const auto& t : errors) if (rng() % 3 == 0) e.insert(t);
        for (const auto& t : causes) if (rng() % 3 == 0) c.insert(t);
        const auto sat = kAllSatisfactions[rng() % 4];
        if (requires_causes(sat) && c.empty()) c.insert(causes.back());
        std::vector<std::pair<int, LabelPayload>> payloads = {
            {1, InteractionLabel{ScqsLabel::from_level(rng() % 4),
                                 std::vector<double>{double(rng() % 101), double(rng() % 101) / 2, 100.0}, text()}},
            {2, ComparisonLabel{int(rng() % 2), static_cast<Superior>(rng() % 3), e, text()}},
            {3, SatisfactionLabel{sat, c, text()}},
            {3, PreferenceLabel{static_cast<Preference>(rng() % 3), text()}},
        };
        for (const auto& [stage, p] : payloads) {
            const bool pair = std::holds_alternative<ComparisonLabel>(p) || std::holds_alternative<PreferenceLabel>(p);
            ASSERT_EQ(payload_from_target(stage, pair, sft_target(p), task, config), p);
        }
    }
}
