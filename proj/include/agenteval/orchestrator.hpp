#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "agenteval/backend.hpp"
#include "agenteval/ingestion.hpp"
#include "agenteval/persistence.hpp"
#include "agenteval/prompts.hpp"

namespace agenteval {

using SystemPair = std::pair<std::string, std::string>;

struct RunSpec {
    std::string run_id;
    std::string dataset_ref;       // dataset id in the store, or a JSONL path
    std::string model_config_ref;  // model config JSON path
    bool all_pairs = true;
    std::vector<SystemPair> system_pairs;  // used when all_pairs is false
    std::set<int> stages_enabled{1, 2, 3};
    bool swap_pairs = false;
    int parallelism = 1;
    // Extra attempts after an unparsable model output. Each re-ask appends a
    // fixed reminder to the prompt, so it has its own prompt hash.
    int reask_limit = 0;

    bool stage_enabled(int stage) const { return stages_enabled.count(stage) != 0; }
    // Throws ValidationError.
    void validate() const;
    // Relative refs in a spec file resolve against `base_dir`. A ref that is
    // not an existing path is kept verbatim (dataset ids).
    static RunSpec from_json(const Json& doc, const std::filesystem::path& base_dir = {});
    static RunSpec load(const std::filesystem::path& path);
};

Json to_json(const RunSpec& spec);

struct PairingResult {
    std::vector<SystemPair> pairs;
    std::vector<std::string> errors;  // requested pairs naming an absent system
};

// All pairs: every unordered pair of the sample's systems once, in system_id
// order, with the reversed pair right after its original when swap_pairs is
// set. Explicit pairs keep the requested order.
PairingResult pair_responses(const EvaluationSample& sample, const RunSpec& spec);

// One model call the pipeline will make.
struct PlannedCall {
    std::string sample_id;
    Stage agent = Stage::kInteraction;
    Target target;
    PromptText prompt;
};

struct FailureEntry {
    std::string sample_id;
    int stage = 1;
    Stage agent = Stage::kInteraction;
    std::optional<Target> target;  // absent for sample-level failures
    std::string error_kind;        // backend error kind, "parse", "validation", ...
    std::string message;

    bool operator==(const FailureEntry&) const = default;
};

Json to_json(const FailureEntry& failure);
FailureEntry failure_from_json(const Json& doc);

// Calls for one sample in tier order. Pairing errors are returned as
// failures instead of calls.
std::vector<PlannedCall> plan_sample(const EvaluationSample& sample, const RunSpec& spec,
                                     const PromptBuilder& builder, const EvaluationConfig& config,
                                     std::vector<FailureEntry>* failures = nullptr);

// The prompt sent for re-ask attempt `n` (n >= 1).
PromptText reask_prompt(const PromptText& prompt, int n);

struct RunCounts {
    std::size_t stage1 = 0;
    std::size_t stage2 = 0;
    std::size_t stage3_single = 0;
    std::size_t stage3_pair = 0;
    std::size_t failures = 0;
    std::size_t completions = 0;
};

struct RunRecord {
    std::string run_id;
    std::string started_at;  // UTC, ISO 8601
    std::string finished_at;
    std::string model_id;
    RunSpec spec;
    std::vector<InteractionVerdict> stage1;
    std::vector<ComparisonVerdict> stage2;
    std::vector<SatisfactionVerdict> stage3_single;
    std::vector<PreferenceVerdict> stage3_pair;
    std::vector<FailureEntry> failures;
    std::vector<CompletionRecord> completions;
    std::string completions_ref = "completions.jsonl";

    RunCounts counts() const;
    // Sorts every collection by (sample_id, system ids).
    void canonicalize();
};

// Clears run_id, timestamps and latencies so that two runs over the same
// inputs compare equal.
RunRecord normalized(RunRecord record);
bool same_results(const RunRecord& a, const RunRecord& b);

struct RunOptions {
    // Directory receiving the run files; empty keeps the run in memory.
    std::filesystem::path run_dir;
    // Replace an existing run directory instead of refusing.
    bool force = false;
    // Called after each sample finishes, from a worker thread.
    std::function<void(std::size_t done, std::size_t total)> progress;
};

// Executes the enabled tiers over `samples`. Samples run concurrently up to
// spec.parallelism; within a sample the tiers run 1, 2, 3. Model output and
// per-item failures land in the failure ledger; the run itself only throws
// for setup errors (bad spec, unknown system, existing run directory).
RunRecord run_pipeline(const RunSpec& spec, const std::vector<EvaluationSample>& samples,
                       const EvaluationConfig& config, const TemplateRegistry& templates,
                       Backend& backend, const RunOptions& options = {});

// Resolves the spec's dataset and model config, then runs into
// store.run_dir(spec.run_id).
RunRecord execute_run(Store& store, const RunSpec& spec, const EvaluationConfig& config,
                      const TemplateRegistry& templates, bool force = false,
                      std::function<void(std::size_t, std::size_t)> progress = {});

std::vector<EvaluationSample> resolve_dataset(const Store& store, const std::string& dataset_ref,
                                              const TaskRegistry& tasks);

// Reads a finalized run directory, verifying its manifest.
RunRecord load_run(const std::filesystem::path& run_dir);

// Run files, in manifest order.
inline constexpr const char* kRunFiles[] = {
    "spec.json",          "verdicts_stage1.jsonl", "verdicts_stage2.jsonl",
    "verdicts_stage3.jsonl", "failures.jsonl",     "completions.jsonl",
};

std::string utc_timestamp();

}  // namespace agenteval
