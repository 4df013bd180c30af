#pragma once

#include <string>
#include <vector>

#include "agenteval/labels.hpp"
#include "agenteval/prompts.hpp"

namespace agenteval {

struct SftOptions {
    // Also export pairwise preference items (stage 3, pair targets).
    bool include_preference = false;
};

struct SftSkip {
    LabelKey key;
    std::string reason;
};

struct SftExport {
    // {"format_version","sample_id","task_id","stage","agent","item","prompt","target"}
    // where "target" is the model output text the stage parser accepts.
    std::vector<Json> records;
    std::size_t candidates = 0;
    std::vector<SftSkip> skipped;         // candidates not exported
    std::size_t unmatched_labels = 0;     // final labels outside the candidate set
};

// Canonical model output for a human label.
std::string sft_target(const LabelPayload& payload);

// Runs the stage parser over `target`. Throws ValidationError when it does
// not parse.
LabelPayload payload_from_target(int stage, bool pair_target, const std::string& target,
                                 const TaskTypeConfig& task, const EvaluationConfig& config);

// The parsed payload of an exported record (the round-trip path).
LabelPayload payload_from_sft_record(const Json& record, const EvaluationConfig& config);

// One record per candidate item with a final label. Candidates are the
// annotation targets of every sample (plus preference pairs if requested).
// Stage-1 labels without dimension scores cannot form a target and are
// skipped with a reason.
SftExport export_sft(const std::vector<EvaluationSample>& samples,
                     const std::vector<HumanLabel>& final_labels, const EvaluationConfig& config,
                     const TemplateRegistry& templates, const SftOptions& options = {});

}  // namespace agenteval
