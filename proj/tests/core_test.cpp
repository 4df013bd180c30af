#include <gtest/gtest.h>

#include "agenteval/core.hpp"
#include "agenteval/errors.hpp"
#include "test_util.hpp"

using namespace agenteval;

TEST(Scqs, LevelAndNameAreABijection) {
    std::set<std::string> names;
    for (int level = 0; level < kScqsLevelCount; ++level) {
        auto label = ScqsLabel::from_level(level);
        EXPECT_EQ(label.level(), level);
        auto back = ScqsLabel::from_name(label.name());
        ASSERT_TRUE(back);
        EXPECT_EQ(back->level(), level);
        names.insert(std::string(label.name()));
    }
    EXPECT_EQ(names.size(), 4u);
    EXPECT_EQ(ScqsLabel::from_level(0).name(), "Semantic Collapse");
    EXPECT_EQ(ScqsLabel::from_level(3).name(), "Informative Excellence");
}

TEST(Scqs, OutOfRangeLevelThrows) {
    EXPECT_THROW(ScqsLabel::from_level(4), RangeError);
    EXPECT_THROW(ScqsLabel::from_level(-1), RangeError);
    EXPECT_FALSE(ScqsLabel::from_name("Excellent"));
}

TEST(Satisfaction, NegativeLevelsRequireCauses) {
    EXPECT_FALSE(requires_causes(Satisfaction::kHighlySatisfied));
    EXPECT_FALSE(requires_causes(Satisfaction::kSatisfied));
    EXPECT_TRUE(requires_causes(Satisfaction::kUnsatisfied));
    EXPECT_TRUE(requires_causes(Satisfaction::kHighlyUnsatisfied));
}

TEST(Satisfaction, ParsesIdentifierAndDisplayLabel) {
    for (auto s : kAllSatisfactions) {
        EXPECT_EQ(parse_satisfaction(to_string(s)), s);
        EXPECT_EQ(parse_satisfaction(display_label(s)), s);
    }
    EXPECT_FALSE(parse_satisfaction("meh"));
}

TEST(Enums, PreferenceAndSuperiorKeepDistinctSpellings) {
    EXPECT_EQ(parse_superior("equivalent"), Superior::kEquivalent);
    EXPECT_FALSE(parse_superior("tie"));
    EXPECT_EQ(parse_preference("tie"), Preference::kTie);
    EXPECT_FALSE(parse_preference("equivalent"));
}

TEST(Enums, FirstOrderDimensionAcceptsAnyCase) {
    EXPECT_EQ(parse_first_order_dimension("study"), FirstOrderDimension::kStudy);
    EXPECT_EQ(parse_first_order_dimension("Study"), FirstOrderDimension::kStudy);
    EXPECT_EQ(parse_first_order_dimension("ENTERTAINMENT"), FirstOrderDimension::kEntertainment);
    EXPECT_FALSE(parse_first_order_dimension("Weather"));
    EXPECT_EQ(to_string(FirstOrderDimension::kStudy), "Study");
}

TEST(TaskRegistry, SeedsSixTaskTypes) {
    auto tasks = default_task_registry();
    EXPECT_EQ(tasks.size(), 6u);
    for (const auto* t : tasks.all()) EXPECT_EQ(t->k(), 3u) << t->task_id;
    EXPECT_THROW(tasks.at("weather"), NotFoundError);
}

TEST(TaskRegistry, RejectsDuplicatesAndBadConfigs) {
    auto tasks = default_task_registry();
    EXPECT_THROW(tasks.register_task_type({"study", "again", {"a"}}), DuplicateError);
    EXPECT_THROW(tasks.register_task_type({"empty", "no dims", {}}), ValidationError);
    EXPECT_THROW(tasks.register_task_type({"dup", "repeat", {"a", "a"}}), ValidationError);
}

TEST(TagVocabulary, DefaultsAndDuplicates) {
    auto errors = default_error_taxonomy();
    EXPECT_TRUE(errors.contains("information_omission"));
    EXPECT_TRUE(errors.contains("factual_error"));
    EXPECT_THROW(errors.add({"factual_error", "again"}), DuplicateError);
    auto causes = default_cause_vocabulary();
    EXPECT_TRUE(causes.contains("verbose"));
    EXPECT_FALSE(causes.contains("factual_error"));
}

TEST(EvaluationConfig, ExtendsSeedsFromJson) {
    auto config = EvaluationConfig::from_json(Json::parse(R"({
        "tasks": [{"task_id": "navigation", "dimension_names": ["route", "timing"]}],
        "error_tags": [{"tag_id": "unsafe_advice", "description": "could harm the user"}]
    })"));
    EXPECT_EQ(config.tasks.at("navigation").k(), 2u);
    EXPECT_EQ(config.tasks.at("study").k(), 3u);
    EXPECT_TRUE(config.error_tags.contains("unsafe_advice"));
    EXPECT_TRUE(config.error_tags.contains("factual_error"));
    EXPECT_THROW(EvaluationConfig::from_json(Json::parse(R"({"tasks": [{"task_id": "x"}]})")), ValidationError);
}

namespace {

EvaluationSample minimal_sample() {
    EvaluationSample s;
    s.sample_id = "s1";
    s.task_id = "study";
    s.first_order_dimension = FirstOrderDimension::kStudy;
    s.input_segments.push_back({SegmentKind::kDialogueTurn, "What is 2+2?", {}, {}, 0});
    s.responses = {{"a", "4"}, {"b", "four"}};
    return s;
}

}  // namespace

TEST(Sample, ValidSampleAndSystemIds) {
    auto s = minimal_sample();
    EXPECT_NO_THROW(validate_sample(s, default_task_registry()));
    EXPECT_EQ(s.system_ids(), (std::vector<std::string>{"a", "b"}));
    EXPECT_TRUE(s.has_system("a"));
    EXPECT_FALSE(s.has_system("c"));
}

TEST(Sample, InvariantsAreEnforced) {
    const auto tasks = default_task_registry();
    auto bad = minimal_sample();
    bad.task_id = "weather";
    EXPECT_THROW(validate_sample(bad, tasks), ValidationError);

    bad = minimal_sample();
    bad.input_segments.push_back({SegmentKind::kDialogueTurn, "again", {}, {}, 0});
    EXPECT_THROW(validate_sample(bad, tasks), ValidationError);

    bad = minimal_sample();
    bad.responses.clear();
    EXPECT_THROW(validate_sample(bad, tasks), ValidationError);

    bad = minimal_sample();
    bad.responses["x|y"] = "pipe";
    EXPECT_THROW(validate_sample(bad, tasks), ValidationError);

    bad = minimal_sample();
    bad.input_segments.clear();
    EXPECT_THROW(validate_sample(bad, tasks), ValidationError);
}

TEST(Segment, KindSpecificRules) {
    EXPECT_THROW(validate_segment({SegmentKind::kDialogueTurn, "", {}, {}, 0}), ValidationError);
    EXPECT_THROW(validate_segment({SegmentKind::kVoiceTranscript, "hi", {"label"}, {}, 0}), ValidationError);
    EXPECT_NO_THROW(validate_segment({SegmentKind::kImageDescriptor, "", {"cat"}, {}, 0}));
    EXPECT_THROW(validate_segment({SegmentKind::kImageDescriptor, "", {}, {"top"}, 0}), ValidationError);
}

TEST(DimensionScores, ArityAndRange) {
    const auto& task = default_task_registry().at("study");
    EXPECT_NO_THROW(validate_scores({"study", {0, 50, 100}}, task));
    EXPECT_THROW(validate_scores({"study", {50, 50}}, task), ValidationError);
    EXPECT_THROW(validate_scores({"study", {50, 50, 100.5}}, task), ValidationError);
    EXPECT_DOUBLE_EQ((DimensionScores{"study", {60, 70, 80}}.mean()), 70.0);
}

TEST(Target, RendersAndOrders) {
    EXPECT_EQ(Target::single("a").to_string(), "a");
    EXPECT_EQ(Target::pair("a", "b").to_string(), "a|b");
    EXPECT_TRUE(Target::pair("a", "b").is_pair());
    EXPECT_NE(Target::pair("a", "b"), Target::pair("b", "a"));
}
