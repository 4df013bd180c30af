#pragma once

#include <compare>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "agenteval/core.hpp"
#include "agenteval/records.hpp"

namespace agenteval {

// Stage-1 human label. Annotators always pick an SCQS level; dimension
// scores are optional.
struct InteractionLabel {
    ScqsLabel quality;
    std::optional<std::vector<double>> scores;
    std::string rationale;

    bool operator==(const InteractionLabel&) const = default;
};

struct ComparisonLabel {
    int consistency = 0;
    Superior superior = Superior::kEquivalent;
    std::set<std::string> error_attributions;
    std::string rationale;

    bool operator==(const ComparisonLabel&) const = default;
};

struct SatisfactionLabel {
    Satisfaction satisfaction = Satisfaction::kSatisfied;
    std::set<std::string> causes;
    std::string explanation;

    bool operator==(const SatisfactionLabel&) const = default;
};

struct PreferenceLabel {
    Preference preferred = Preference::kTie;
    std::string rationale;

    bool operator==(const PreferenceLabel&) const = default;
};

using LabelPayload =
    std::variant<InteractionLabel, ComparisonLabel, SatisfactionLabel, PreferenceLabel>;

// Identifies one annotation item. Stage 3 with a pair target is the pairwise
// preference task; stage 3 with a single target is satisfaction.
struct LabelKey {
    std::string sample_id;
    int stage = 1;
    Target target;

    auto operator<=>(const LabelKey&) const = default;
};

std::string to_string(const LabelKey& key);  // "sample/stage/target"
Json to_json(const LabelKey& key);

struct HumanLabel {
    std::string sample_id;
    int stage = 1;
    Target target;
    LabelPayload payload;
    std::string annotator_id;
    bool is_final = false;

    LabelKey key() const { return {sample_id, stage, target}; }

    bool operator==(const HumanLabel&) const = default;
};

Json to_json(const LabelPayload& payload);
Json to_json(const HumanLabel& label);
// Throws ValidationError on shape errors, including a payload that does not
// fit the stage/target combination.
HumanLabel human_label_from_json(const Json& doc);

// Throws ValidationError unless stage, target shape and payload type agree.
void check_label_shape(const HumanLabel& label);

// Full validation against the sample the label refers to: systems exist,
// scores fit the task, tags come from the configured vocabularies, negative
// satisfaction names a cause.
void validate_label(const HumanLabel& label, const EvaluationSample& sample,
                    const EvaluationConfig& config);

// Equality of the structured judgement, ignoring rationale/explanation text.
bool same_judgement(const LabelPayload& a, const LabelPayload& b);

// The categorical label agreement is measured on: SCQS level, z,
// satisfaction or preference, rendered as a string.
std::string primary_label(const LabelPayload& payload);

// Items an annotator is asked to label for one sample: stage 1 and stage 3
// (satisfaction) per system, stage 2 per system pair in system_id order.
std::vector<LabelKey> annotation_targets(const EvaluationSample& sample);

}  // namespace agenteval
