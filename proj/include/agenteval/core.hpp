#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace agenteval {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Closed label spaces
// ---------------------------------------------------------------------------

enum class SegmentKind { kDialogueTurn, kVoiceTranscript, kImageDescriptor };

// Scenario categories used to slice per-assistant score tables.
enum class FirstOrderDimension {
    kEquipment,
    kSocializing,
    kLife,
    kStudy,
    kEntertainment,
    kInformation,
};

inline constexpr FirstOrderDimension kAllFirstOrderDimensions[] = {
    FirstOrderDimension::kEquipment,     FirstOrderDimension::kSocializing,
    FirstOrderDimension::kLife,          FirstOrderDimension::kStudy,
    FirstOrderDimension::kEntertainment, FirstOrderDimension::kInformation,
};

// Stage-2 superiority verdict.
enum class Superior { kA, kB, kEquivalent };

// Stage-3 pairwise preference. `tie` names the same concept as stage-2
// `equivalent`; the distinct spelling keeps the two output schemas apart.
enum class Preference { kA, kB, kTie };

enum class Satisfaction {
    kHighlySatisfied,
    kSatisfied,
    kUnsatisfied,
    kHighlyUnsatisfied,
};

inline constexpr Satisfaction kAllSatisfactions[] = {
    Satisfaction::kHighlySatisfied,
    Satisfaction::kSatisfied,
    Satisfaction::kUnsatisfied,
    Satisfaction::kHighlyUnsatisfied,
};

std::string_view to_string(SegmentKind kind);
std::string_view to_string(FirstOrderDimension dim);
std::string_view to_string(Superior z);
std::string_view to_string(Preference p);
// Snake-case identifier used in records ("highly_satisfied").
std::string_view to_string(Satisfaction s);
// Human-readable label used in prompts ("highly satisfied").
std::string_view display_label(Satisfaction s);

std::optional<SegmentKind> parse_segment_kind(std::string_view text);
std::optional<FirstOrderDimension> parse_first_order_dimension(std::string_view text);
std::optional<Superior> parse_superior(std::string_view text);
std::optional<Preference> parse_preference(std::string_view text);
// Accepts either the identifier or the display label.
std::optional<Satisfaction> parse_satisfaction(std::string_view text);

// Negative satisfaction levels must name at least one cause.
bool requires_causes(Satisfaction s);

// Four-level semantic content quality scale. Level and name are a bijection.
class ScqsLabel {
public:
    ScqsLabel() = default;

    // Throws RangeError for levels outside 0..3.
    static ScqsLabel from_level(int level);
    static std::optional<ScqsLabel> from_name(std::string_view name);

    int level() const { return level_; }
    std::string_view name() const;
    std::string_view definition() const;

    auto operator<=>(const ScqsLabel&) const = default;

private:
    explicit ScqsLabel(int level) : level_(level) {}
    int level_ = 0;
};

inline constexpr int kScqsLevelCount = 4;

ScqsLabel scqs_from_level(int level);

// ---------------------------------------------------------------------------
// Configuration registries
// ---------------------------------------------------------------------------

struct TaskTypeConfig {
    std::string task_id;
    std::string display_name;
    std::vector<std::string> dimension_names;
    std::string prompt_template_ref = "interaction.default";

    std::size_t k() const { return dimension_names.size(); }
    // Throws ValidationError when k == 0, ids are empty or dimension names repeat.
    void validate() const;

    bool operator==(const TaskTypeConfig&) const = default;
};

// Task-type registry. Populated once at startup and read-only afterwards.
class TaskRegistry {
public:
    // Throws DuplicateError if the task_id is taken.
    const TaskTypeConfig& register_task_type(TaskTypeConfig config);

    const TaskTypeConfig* find(std::string_view task_id) const;
    // Throws NotFoundError.
    const TaskTypeConfig& at(std::string_view task_id) const;

    std::size_t size() const { return configs_.size(); }
    std::vector<const TaskTypeConfig*> all() const;

private:
    std::map<std::string, TaskTypeConfig, std::less<>> configs_;
};

struct Tag {
    std::string tag_id;
    std::string description;

    bool operator==(const Tag&) const = default;
};

using ErrorTag = Tag;
using CauseTag = Tag;

// Ordered, extensible tag vocabulary (error attributions, satisfaction causes).
class TagVocabulary {
public:
    TagVocabulary() = default;
    explicit TagVocabulary(std::vector<Tag> tags);

    // Throws DuplicateError.
    void add(Tag tag);
    bool contains(std::string_view tag_id) const;
    const std::vector<Tag>& tags() const { return tags_; }
    std::size_t size() const { return tags_.size(); }

private:
    std::vector<Tag> tags_;
};

TaskRegistry default_task_registry();
TagVocabulary default_error_taxonomy();
TagVocabulary default_cause_vocabulary();

// Everything a run needs to validate samples and verdicts.
struct EvaluationConfig {
    TaskRegistry tasks = default_task_registry();
    TagVocabulary error_tags = default_error_taxonomy();
    TagVocabulary cause_tags = default_cause_vocabulary();

    // Fields absent from the JSON document keep their defaults. Task and tag
    // lists given in the document extend the built-in seeds.
    static EvaluationConfig from_json(const Json& doc);
    static EvaluationConfig load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Samples and verdicts
// ---------------------------------------------------------------------------

struct ModalSegment {
    SegmentKind kind = SegmentKind::kDialogueTurn;
    std::string text;
    std::vector<std::string> labels;
    std::vector<std::string> salient_regions;
    std::size_t order_index = 0;

    bool operator==(const ModalSegment&) const = default;
};

struct EvaluationSample {
    std::string sample_id;
    std::string task_id;
    FirstOrderDimension first_order_dimension = FirstOrderDimension::kInformation;
    std::vector<ModalSegment> input_segments;
    std::map<std::string, std::string> responses;  // system_id -> response text
    Json extra = Json::object();                   // unknown fields kept in lenient mode

    std::vector<std::string> system_ids() const;
    bool has_system(std::string_view system_id) const;

    bool operator==(const EvaluationSample&) const = default;
};

// Throws ValidationError describing the first violated invariant.
void validate_segment(const ModalSegment& segment);
void validate_sample(const EvaluationSample& sample, const TaskRegistry& tasks);

// One system or an ordered pair of systems.
struct Target {
    std::string system_a;
    std::optional<std::string> system_b;

    static Target single(std::string system_id) { return {std::move(system_id), std::nullopt}; }
    static Target pair(std::string a, std::string b) { return {std::move(a), std::move(b)}; }

    bool is_pair() const { return system_b.has_value(); }
    std::string to_string() const;  // "a" or "a|b"

    auto operator<=>(const Target&) const = default;
};

struct DimensionScores {
    std::string task_id;
    std::vector<double> scores;

    double mean() const;

    bool operator==(const DimensionScores&) const = default;
};

void validate_scores(const DimensionScores& scores, const TaskTypeConfig& task);

struct InteractionVerdict {
    std::string sample_id;
    std::string system_id;
    DimensionScores dimension_scores;
    ScqsLabel quality;
    std::string rationale;
    Json extra = Json::object();

    bool operator==(const InteractionVerdict&) const = default;
};

struct ComparisonVerdict {
    std::string sample_id;
    std::string system_a;
    std::string system_b;
    int consistency = 0;
    Superior superior = Superior::kEquivalent;
    std::set<std::string> error_attributions;
    std::string rationale;
    Json extra = Json::object();

    bool operator==(const ComparisonVerdict&) const = default;
};

void validate_comparison(const ComparisonVerdict& verdict, const TagVocabulary& taxonomy);

struct SatisfactionVerdict {
    std::string sample_id;
    std::string system_id;
    Satisfaction satisfaction = Satisfaction::kSatisfied;
    std::set<std::string> causes;
    std::string explanation;
    Json extra = Json::object();

    bool operator==(const SatisfactionVerdict&) const = default;
};

void validate_satisfaction(const SatisfactionVerdict& verdict, const TagVocabulary& causes);

struct PreferenceVerdict {
    std::string sample_id;
    std::string system_a;
    std::string system_b;
    Preference preferred = Preference::kTie;
    std::string rationale;
    Json extra = Json::object();

    bool operator==(const PreferenceVerdict&) const = default;
};

}  // namespace agenteval
