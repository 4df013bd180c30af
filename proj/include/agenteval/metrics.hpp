#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agenteval/errors.hpp"
#include "agenteval/labels.hpp"
#include "agenteval/orchestrator.hpp"

namespace agenteval {

// Raised instead of producing NaN when no item has both a model verdict and a
// final human label.
class EmptyDenominatorError : public Error {
public:
    explicit EmptyDenominatorError(const std::string& message)
        : Error(ErrorCode::kValidation, message) {}
};

// Agreement is measured separately for the three tiers plus the pairwise
// preference task.
enum class AgreementStage { kInteraction, kSemantic, kExperience, kPreference };

inline constexpr AgreementStage kAllAgreementStages[] = {
    AgreementStage::kInteraction,
    AgreementStage::kSemantic,
    AgreementStage::kExperience,
    AgreementStage::kPreference,
};

std::string_view to_string(AgreementStage stage);
// Column label used in the agreement table ("interaction evaluation", ...).
std::string_view column_label(AgreementStage stage);
std::optional<AgreementStage> parse_agreement_stage(std::string_view text);
int tier_of(AgreementStage stage);

// 100 * agree / total in hundredths of a percent, rounded half up.
std::int64_t rate_hundredths(std::int64_t agree, std::int64_t total);
// "89.60" for 8960.
std::string format_hundredths(std::int64_t hundredths);
// Half-up to two decimals for a real value ("85.00").
std::string format_fixed2(double value);

struct AgreementEntry {
    AgreementStage stage = AgreementStage::kInteraction;
    std::int64_t agree_count = 0;
    std::int64_t total = 0;
    std::int64_t rate_hundredths = 0;
    std::int64_t model_only = 0;  // verdict without a final human label
    std::int64_t human_only = 0;  // final human label without a verdict

    std::string rate_percent() const { return format_hundredths(rate_hundredths); }
    bool operator==(const AgreementEntry&) const = default;
};

struct AgreementReport {
    std::string model_id;
    std::vector<AgreementEntry> entries;      // stages with at least one matched item
    std::vector<AgreementStage> no_data;      // enabled stages without matched items

    const AgreementEntry* find(AgreementStage stage) const;
};

Json to_json(const AgreementReport& report);

// Primary categorical label per item key. Throws ValidationError on two
// entries with the same key.
using LabelMap = std::map<LabelKey, std::string>;

LabelMap model_labels(const RunRecord& run, AgreementStage stage);
LabelMap human_labels(const std::vector<HumanLabel>& final_labels, AgreementStage stage);

// Exact match of the primary label over keys present on both sides. Throws
// EmptyDenominatorError when no key matches.
AgreementEntry agreement_rate(const LabelMap& model, const LabelMap& human, AgreementStage stage);
AgreementEntry agreement_rate(const RunRecord& run, const std::vector<HumanLabel>& final_labels,
                              AgreementStage stage);

// One entry per enabled stage of the run that has matched items.
AgreementReport agreement_report(const RunRecord& run, const std::vector<HumanLabel>& final_labels);

// ---------------------------------------------------------------------------
// Average scores per first-order dimension and system

struct DimensionTable {
    std::vector<std::string> systems;  // column order
    std::map<FirstOrderDimension, std::int64_t> totals;
    // Means on the 0-100 scale; absent cells have no entry.
    std::map<std::pair<FirstOrderDimension, std::string>, double> cells;

    std::optional<double> cell(FirstOrderDimension dim, const std::string& system) const;
};

// Cell = mean over the dimension's samples of each verdict's mean score.
// Totals count the samples of each dimension. Throws ValidationError for a
// verdict whose sample is unknown.
DimensionTable dimension_table(const std::vector<InteractionVerdict>& verdicts,
                               const std::vector<EvaluationSample>& samples);

// Satisfaction label counts per system (stage-3 single verdicts).
using SatisfactionDistribution = std::map<std::string, std::map<Satisfaction, std::int64_t>>;
SatisfactionDistribution satisfaction_distribution(const std::vector<SatisfactionVerdict>& verdicts);

// ---------------------------------------------------------------------------
// Composite loss

struct LossConfig {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;

    void validate() const;  // non-negative, finite
};

struct LossComponents {
    double content = 0.0;
    double consistency = 0.0;
    double experience = 0.0;
};

struct LossBreakdown {
    double l_content = 0.0;
    double l_consistency = 0.0;
    double l_experience = 0.0;
    double total = 0.0;
    std::int64_t content_items = 0;
    std::int64_t consistency_items = 0;
    std::int64_t experience_items = 0;
};

Json to_json(const LossBreakdown& loss);

// Components are means over items; total = alpha*l_content +
// beta*l_consistency + gamma*l_experience. Throws ValidationError on an
// empty item list or a negative component.
LossBreakdown composite_loss(const std::vector<LossComponents>& items, const LossConfig& config);

// Variant for components measured over different item sets. An empty list
// contributes 0 and reports 0 items.
LossBreakdown composite_loss(const std::vector<double>& content,
                             const std::vector<double>& consistency,
                             const std::vector<double>& experience, const LossConfig& config);

// -ln p(label). Probabilities must be non-negative and sum to 1 within 1e-6;
// p is clamped at 1e-12 so a zero-probability label costs about 27.6 nats.
double cross_entropy(const std::map<std::string, double>& distribution, const std::string& label);

// A predicted label distribution for one annotation item, as read by the
// `loss` command:
//   {"sample_id":..,"stage":1,"target":..,"distribution":{"2":0.7,"3":0.3}}
struct PredictedDistribution {
    LabelKey key;
    std::map<std::string, double> distribution;
};

PredictedDistribution predicted_distribution_from_json(const Json& doc);

// Cross-entropy of each prediction against the final label with the same
// key, grouped by tier (stage 3 uses single-system satisfaction).
// Predictions without a final label are ignored.
LossBreakdown loss_from_predictions(const std::vector<PredictedDistribution>& predictions,
                                    const std::vector<HumanLabel>& final_labels,
                                    const LossConfig& config);

}  // namespace agenteval
