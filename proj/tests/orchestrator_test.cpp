#include <gtest/gtest.h>

#include <chrono>

#include "agenteval/errors.hpp"
#include "agenteval/orchestrator.hpp"
#include "agenteval/parsers.hpp"
#include "test_util.hpp"

using namespace agenteval;
using namespace agenteval::testing;

namespace {

std::unique_ptr<Backend> demo_backend(const RunSpec& spec) {
    return make_backend(ModelConfig::load(spec.model_config_ref));
}

// A valid canonical answer for every planned call.
std::string canned_output(const PlannedCall& call, const EvaluationConfig& config, const EvaluationSample& sample) {
    switch (call.agent) {
        case Stage::kInteraction: {
            std::vector<double> scores(config.tasks.at(sample.task_id).k(), 80.0);
            return interaction_output(scores, ScqsLabel::from_level(2), "ok").dump();
        }
        case Stage::kSemantic: return semantic_output(1, Superior::kA, {}, "ok").dump();
        case Stage::kExperienceSingle: return experience_single_output(Satisfaction::kSatisfied, {}, "ok").dump();
        case Stage::kExperiencePair: return experience_pair_output(Preference::kB, "ok").dump();
    }
    return {};
}

ScriptFixtures script_for(const std::vector<EvaluationSample>& samples, const RunSpec& spec,
                          const EvaluationConfig& config, const TemplateRegistry& templates) {
    PromptBuilder builder(templates, config);
    ScriptFixtures fixtures;
    for (const auto& s : samples) {
        for (const auto& call : plan_sample(s, spec, builder, config)) {
            fixtures[prompt_hash(call.prompt)] = canned_output(call, config, s);
        }
    }
    return fixtures;
}

EvaluationSample with_systems(std::vector<std::string> systems, std::string id = "s") {
    auto s = demo_samples().at(0);
    s.sample_id = std::move(id);
    s.responses.clear();
    for (const auto& sys : systems) s.responses[sys] = "response from " + sys;
    return s;
}

}  // namespace

TEST(Pipeline, DemoRunIsDeterministicAndExhaustive) {
    const auto spec = demo_spec();
    const auto samples = demo_samples();
    const EvaluationConfig config;
    const auto templates = TemplateRegistry::defaults();
    auto backend = demo_backend(spec);

    const auto start = std::chrono::steady_clock::now();
    auto first = run_pipeline(spec, samples, config, templates, *backend);
    auto second = run_pipeline(spec, samples, config, templates, *backend);
    const auto elapsed = std::chrono::steady_clock::now() - start;

    EXPECT_TRUE(same_results(first, second));
    EXPECT_LT(elapsed, std::chrono::seconds(10));
    const auto c = first.counts();
    EXPECT_EQ(c.stage1, 60u);
    EXPECT_EQ(c.stage2, 60u);
    EXPECT_EQ(c.stage3_single, 60u);
    EXPECT_EQ(c.stage3_pair, 60u);
    EXPECT_EQ(c.failures, 0u);
    EXPECT_EQ(c.completions, 240u);
}

TEST(Pipeline, ParallelismDoesNotChangeResults) {
    auto spec = demo_spec();
    const auto samples = demo_samples();
    const EvaluationConfig config;
    const auto templates = TemplateRegistry::defaults();
    auto backend = demo_backend(spec);
    spec.parallelism = 1;
    auto serial = run_pipeline(spec, samples, config, templates, *backend);
    spec.parallelism = 8;
    auto parallel = run_pipeline(spec, samples, config, templates, *backend);
    // The two RunSpecs differ in parallelism, so compare what the runs produced.
    serial.canonicalize();
    parallel.canonicalize();
    EXPECT_EQ(serial.stage1, parallel.stage1);
    EXPECT_EQ(serial.stage2, parallel.stage2);
    EXPECT_EQ(serial.stage3_single, parallel.stage3_single);
    EXPECT_EQ(serial.stage3_pair, parallel.stage3_pair);
    EXPECT_EQ(serial.failures, parallel.failures);
    EXPECT_EQ(serial.completions.size(), parallel.completions.size());
    // Canonical order: sorted by sample then system.
    for (std::size_t i = 1; i < parallel.stage1.size(); ++i) {
        const auto& a = parallel.stage1[i - 1];
        const auto& b = parallel.stage1[i];
        EXPECT_LT(std::tie(a.sample_id, a.system_id), std::tie(b.sample_id, b.system_id));
    }
}

TEST(Pipeline, StageGating) {
    auto spec = demo_spec();
    const EvaluationConfig config;
    const auto templates = TemplateRegistry::defaults();
    auto backend = demo_backend(spec);
    spec.stages_enabled = {1};
    auto only1 = run_pipeline(spec, demo_samples(), config, templates, *backend);
    EXPECT_EQ(only1.counts().stage1, 60u);
    EXPECT_TRUE(only1.stage2.empty());
    EXPECT_TRUE(only1.stage3_single.empty());
    EXPECT_TRUE(only1.stage3_pair.empty());
    EXPECT_EQ(only1.completions.size(), 60u);

    spec.stages_enabled = {2, 3};
    auto later = run_pipeline(spec, demo_samples(), config, templates, *backend);
    EXPECT_TRUE(later.stage1.empty());
    EXPECT_EQ(later.counts().stage2, 60u);
    EXPECT_EQ(later.counts().stage3_pair, 60u);
}

TEST(Pipeline, ScriptedMissBecomesAFailureEntry) {
    RunSpec spec;
    spec.run_id = "miss";
    spec.dataset_ref = "inline";
    const EvaluationConfig config;
    const auto templates = TemplateRegistry::defaults();
    const std::vector<EvaluationSample> samples = {with_systems({"a", "b"})};
    auto fixtures = script_for(samples, spec, config, templates);
    PromptBuilder builder(templates, config);
    const auto calls = plan_sample(samples[0], spec, builder, config);
    ASSERT_EQ(calls.size(), 6u);  // 2 interaction, 1 semantic, 2 single, 1 pair
    fixtures.erase(prompt_hash(calls[2].prompt));
    auto backend = script_backend(fixtures);
    auto run = run_pipeline(spec, samples, config, templates, *backend);
    ASSERT_EQ(run.failures.size(), 1u);
    EXPECT_EQ(run.failures[0].error_kind, "scripted_miss");
    EXPECT_EQ(run.failures[0].stage, 2);
    EXPECT_EQ(run.failures[0].target, Target::pair("a", "b"));
    EXPECT_EQ(run.counts().stage1 + run.counts().stage3_single + run.counts().stage3_pair, 5u);
}

TEST(Pipeline, ReaskRecoversUnparsableOutput) {
    RunSpec spec;
    spec.run_id = "reask";
    spec.dataset_ref = "inline";
    spec.stages_enabled = {3};
    const EvaluationConfig config;
    const auto templates = TemplateRegistry::defaults();
    const std::vector<EvaluationSample> samples = {with_systems({"a", "b"})};
    auto fixtures = script_for(samples, spec, config, templates);
    PromptBuilder builder(templates, config);
    const auto call = plan_sample(samples[0], spec, builder, config).at(0);
    ASSERT_EQ(call.agent, Stage::kExperienceSingle);
    const auto good = fixtures.at(prompt_hash(call.prompt));
    fixtures[prompt_hash(call.prompt)] = "I would rather not answer in JSON.";
    fixtures[prompt_hash(reask_prompt(call.prompt, 1))] = good;

    auto backend = script_backend(fixtures);
    auto without = run_pipeline(spec, samples, config, templates, *backend);
    ASSERT_EQ(without.failures.size(), 1u);
    EXPECT_EQ(without.failures[0].error_kind, "parse");

    spec.reask_limit = 2;
    auto with = run_pipeline(spec, samples, config, templates, *backend);
    EXPECT_TRUE(with.failures.empty());
    EXPECT_EQ(with.counts().stage3_single, 2u);
    EXPECT_EQ(with.completions.size(), 4u);  // one extra completion for the re-ask
    EXPECT_NE(reask_prompt(call.prompt, 1).body, call.prompt.body);
    EXPECT_NE(reask_prompt(call.prompt, 2), reask_prompt(call.prompt, 1));
}

TEST(Pipeline, UnknownExplicitSystemIsASetupError) {
    auto spec = demo_spec();
    spec.all_pairs = false;
    spec.system_pairs = {{"atlas", "zephyr"}};
    const EvaluationConfig config;
    auto backend = demo_backend(spec);
    EXPECT_THROW(run_pipeline(spec, demo_samples(), config, TemplateRegistry::defaults(), *backend), ValidationError);
}

TEST(Pipeline, SystemMissingFromOneSampleFailsOnlyThatSample) {
    RunSpec spec;
    spec.run_id = "partial";
    spec.dataset_ref = "inline";
    spec.all_pairs = false;
    spec.system_pairs = {{"a", "c"}};
    spec.stages_enabled = {2};
    const EvaluationConfig config;
    const auto templates = TemplateRegistry::defaults();
    const std::vector<EvaluationSample> samples = {with_systems({"a", "b", "c"}, "s1"), with_systems({"a", "b"}, "s2")};
    auto backend = script_backend(script_for(samples, spec, config, templates));
    auto run = run_pipeline(spec, samples, config, templates, *backend);
    ASSERT_EQ(run.stage2.size(), 1u);
    EXPECT_EQ(run.stage2[0].sample_id, "s1");
    ASSERT_EQ(run.failures.size(), 1u);
    EXPECT_EQ(run.failures[0].sample_id, "s2");
    EXPECT_EQ(run.failures[0].error_kind, "missing_system");
}

TEST(Pipeline, RunDirectoryIsWrittenOnceAndReloads) {
    TempDir dir;
    Store store(dir.path());
    const auto spec = demo_spec();
    const EvaluationConfig config;
    const auto templates = TemplateRegistry::defaults();
    std::size_t last_done = 0, last_total = 0;
    auto run = execute_run(store, spec, config, templates, false, [&](std::size_t d, std::size_t t) {
        last_done = std::max(last_done, d);
        last_total = t;
    });
    EXPECT_EQ(last_done, 20u);
    EXPECT_EQ(last_total, 20u);
    const auto run_dir = store.run_dir(spec.run_id);
    for (const auto* name : kRunFiles) EXPECT_TRUE(fs::exists(run_dir / name)) << name;
    EXPECT_TRUE(fs::exists(run_dir / "manifest.json"));

    auto loaded = load_run(run_dir);
    EXPECT_TRUE(same_results(loaded, run));
    EXPECT_EQ(loaded.run_id, spec.run_id);
    EXPECT_EQ(loaded.model_id, "demo-judge");

    EXPECT_THROW(execute_run(store, spec, config, templates), ConflictError);
    EXPECT_NO_THROW(execute_run(store, spec, config, templates, true));

    std::ofstream(run_dir / "verdicts_stage2.jsonl", std::ios::app) << "{}\n";
    EXPECT_THROW(load_run(run_dir), StorageError);
    EXPECT_THROW(load_run(dir / "nowhere"), NotFoundError);
}

TEST(Pipeline, NormalizationIgnoresOnlyVolatileFields) {
    auto spec = demo_spec();
    auto backend = demo_backend(spec);
    auto run = run_pipeline(spec, demo_samples(), EvaluationConfig{}, TemplateRegistry::defaults(), *backend);
    auto other = run;
    other.run_id = "renamed";
    other.started_at = "2001-01-01T00:00:00Z";
    for (auto& c : other.completions) c.latency_ms += 5;
    EXPECT_TRUE(same_results(run, other));
    other.stage1[3].rationale += "!";
    EXPECT_FALSE(same_results(run, other));
}

TEST(RunSpec, JsonRoundTripAndValidation) {
    auto spec = demo_spec();
    EXPECT_EQ(spec.run_id, "demo-run");
    EXPECT_TRUE(fs::path(spec.model_config_ref).is_absolute());
    auto back = RunSpec::from_json(to_json(spec));
    EXPECT_EQ(to_json(back), to_json(spec));

    auto bad = spec;
    bad.parallelism = 0;
    EXPECT_THROW(bad.validate(), ValidationError);
    bad = spec;
    bad.stages_enabled = {4};
    EXPECT_THROW(bad.validate(), ValidationError);
    bad = spec;
    bad.all_pairs = false;
    bad.system_pairs = {{"a", "a"}};
    EXPECT_THROW(bad.validate(), ValidationError);
    bad.system_pairs = {{"a", "b"}, {"a", "b"}};
    EXPECT_THROW(bad.validate(), ValidationError);
    bad = spec;
    bad.run_id = "../up";
    EXPECT_THROW(bad.validate(), ValidationError);
}

// Property: all-pairs covers every unordered pair exactly once in system_id
// order; swap adds each reversed pair right after its original.
TEST(PairingProperty, AllPairsAndSwap) {
    std::mt19937_64 rng(test_seed(11));
    for (int round = 0; round < 300; ++round) {
        std::set<std::string> ids;
        const auto n = 1 + rng() % 7;
        while (ids.size() < n) ids.insert("sys" + std::to_string(rng() % 50));
        auto sample = with_systems({ids.begin(), ids.end()});
        RunSpec spec;
        spec.swap_pairs = rng() % 2;
        auto result = pair_responses(sample, spec);
        EXPECT_TRUE(result.errors.empty());
        const std::size_t unordered = n * (n - 1) / 2;
        ASSERT_EQ(result.pairs.size(), spec.swap_pairs ? 2 * unordered : unordered);
        std::set<SystemPair> seen;
        const std::size_t step = spec.swap_pairs ? 2 : 1;
        for (std::size_t i = 0; i < result.pairs.size(); i += step) {
            const auto& p = result.pairs[i];
            EXPECT_LT(p.first, p.second);
            EXPECT_TRUE(seen.insert(p).second);
            if (i > 0) {
                EXPECT_LT(result.pairs[i - step], p);
            }
            if (spec.swap_pairs) {
                EXPECT_EQ(result.pairs[i + 1], SystemPair(p.second, p.first));
            }
        }
    }
}

TEST(Pairing, ExplicitPairsKeepOrderAndReportMissingSystems) {
    auto sample = with_systems({"a", "b", "c"});
    RunSpec spec;
    spec.all_pairs = false;
    spec.system_pairs = {{"c", "a"}, {"b", "z"}, {"a", "b"}};
    auto result = pair_responses(sample, spec);
    EXPECT_EQ(result.pairs, (std::vector<SystemPair>{{"c", "a"}, {"a", "b"}}));
    ASSERT_EQ(result.errors.size(), 1u);
    EXPECT_NE(result.errors[0].find("z"), std::string::npos);
}

TEST(FailureEntry, JsonRoundTrip) {
    FailureEntry f{"s1", 2, Stage::kSemantic, Target::pair("a", "b"), "timeout_exhausted", "slow"};
    EXPECT_EQ(failure_from_json(to_json(f)), f);
    FailureEntry sample_level{"s2", 1, Stage::kInteraction, std::nullopt, "validation", "bad"};
    EXPECT_EQ(failure_from_json(to_json(sample_level)), sample_level);
}
