#pragma once

// Canonical JSONL record format for samples and verdicts. Field names match
// the struct members. Every record carries `format_version`.

#include <string>

#include "agenteval/core.hpp"

namespace agenteval {

inline constexpr int kFormatVersion = 1;

// Strict rejects unknown fields; lenient keeps them in `extra`.
enum class ParseMode { kStrict, kLenient };

Json to_json(const Target& target);
Target target_from_json(const Json& value);

Json to_json(const ModalSegment& segment);
Json to_json(const EvaluationSample& sample);
Json to_json(const InteractionVerdict& verdict);
Json to_json(const ComparisonVerdict& verdict);
Json to_json(const SatisfactionVerdict& verdict);
Json to_json(const PreferenceVerdict& verdict);

// All throw ValidationError on missing, mistyped or (strict) unknown fields.
// They check shape only; cross-record rules (registry lookups, taxonomy) are
// the caller's job.
ModalSegment segment_from_json(const Json& doc, ParseMode mode = ParseMode::kStrict);
EvaluationSample sample_from_json(const Json& doc, ParseMode mode = ParseMode::kStrict);
InteractionVerdict interaction_verdict_from_json(const Json& doc,
                                                 ParseMode mode = ParseMode::kStrict);
ComparisonVerdict comparison_verdict_from_json(const Json& doc,
                                               ParseMode mode = ParseMode::kStrict);
SatisfactionVerdict satisfaction_verdict_from_json(const Json& doc,
                                                   ParseMode mode = ParseMode::kStrict);
PreferenceVerdict preference_verdict_from_json(const Json& doc,
                                               ParseMode mode = ParseMode::kStrict);

// Compact single-line dump used for JSONL output.
std::string to_line(const Json& record);

}  // namespace agenteval
