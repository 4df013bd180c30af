#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agenteval/core.hpp"

namespace agenteval {

enum class ParseStatus { kOk, kRepaired, kFailed };

std::string_view to_string(ParseStatus status);

// status == kFailed exactly when verdict is empty.
template <typename Verdict>
struct ParseOutcome {
    ParseStatus status = ParseStatus::kFailed;
    std::optional<Verdict> verdict;
    std::vector<std::string> diagnostics;

    bool succeeded() const { return status != ParseStatus::kFailed; }
};

// How unknown tag ids (error tags, cause tags) are treated. Strict fails the
// parse; lenient drops them with a diagnostic and reports kRepaired.
enum class TagPolicy { kStrict, kLenient };

struct ExtractedObject {
    Json object;
    bool repaired = false;
};

// Direct parse of the whole text (surrounding whitespace allowed) as a JSON
// object; failing that, the first balanced {...} substring that parses as a
// JSON object (this strips code fences and leading/trailing prose). Never
// throws.
std::optional<ExtractedObject> extract_json_object(std::string_view raw,
                                                   std::vector<std::string>& diagnostics);

// Parsed verdicts carry empty sample/system ids; the caller fills them in.
ParseOutcome<InteractionVerdict> parse_interaction_output(std::string_view raw,
                                                          const TaskTypeConfig& task);
ParseOutcome<ComparisonVerdict> parse_semantic_output(std::string_view raw,
                                                      const TagVocabulary& taxonomy,
                                                      TagPolicy policy = TagPolicy::kStrict);
ParseOutcome<SatisfactionVerdict> parse_experience_single(std::string_view raw,
                                                          const TagVocabulary& causes,
                                                          TagPolicy policy = TagPolicy::kStrict);
ParseOutcome<PreferenceVerdict> parse_experience_pair(std::string_view raw);

// Canonical model-output JSON each parser accepts; used for SFT targets and
// scripted fixtures.
Json interaction_output(const std::vector<double>& scores, const ScqsLabel& quality,
                        const std::string& rationale);
Json semantic_output(int consistency, Superior superior, const std::set<std::string>& errors,
                     const std::string& rationale);
Json experience_single_output(Satisfaction satisfaction, const std::set<std::string>& causes,
                              const std::string& explanation);
Json experience_pair_output(Preference preferred, const std::string& rationale);

}  // namespace agenteval
