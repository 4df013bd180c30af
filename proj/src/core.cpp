#include "agenteval/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "agenteval/errors.hpp"

namespace agenteval {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::kValidation: return "validation";
        case ErrorCode::kDuplicate: return "duplicate";
        case ErrorCode::kRange: return "range";
        case ErrorCode::kNotFound: return "not_found";
        case ErrorCode::kConflict: return "conflict";
        case ErrorCode::kBackend: return "backend";
        case ErrorCode::kStorage: return "storage";
        case ErrorCode::kUsage: return "usage";
    }
    return "unknown";
}

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::pair<Enum, std::string_view>, N>& table,
                           std::string_view text) {
    for (const auto& [value, name] : table) {
        if (name == text) return value;
    }
    return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table,
                         Enum value) {
    for (const auto& [v, name] : table) {
        if (v == value) return name;
    }
    return "?";
}

constexpr std::array<std::pair<SegmentKind, std::string_view>, 3> kSegmentKinds{{
    {SegmentKind::kDialogueTurn, "dialogue_turn"},
    {SegmentKind::kVoiceTranscript, "voice_transcript"},
    {SegmentKind::kImageDescriptor, "image_descriptor"},
}};

constexpr std::array<std::pair<FirstOrderDimension, std::string_view>, 6> kDimensions{{
    {FirstOrderDimension::kEquipment, "Equipment"},
    {FirstOrderDimension::kSocializing, "Socializing"},
    {FirstOrderDimension::kLife, "Life"},
    {FirstOrderDimension::kStudy, "Study"},
    {FirstOrderDimension::kEntertainment, "Entertainment"},
    {FirstOrderDimension::kInformation, "Information"},
}};

constexpr std::array<std::pair<Superior, std::string_view>, 3> kSuperior{{
    {Superior::kA, "A"},
    {Superior::kB, "B"},
    {Superior::kEquivalent, "equivalent"},
}};

constexpr std::array<std::pair<Preference, std::string_view>, 3> kPreference{{
    {Preference::kA, "A"},
    {Preference::kB, "B"},
    {Preference::kTie, "tie"},
}};

constexpr std::array<std::pair<Satisfaction, std::string_view>, 4> kSatisfactionIds{{
    {Satisfaction::kHighlySatisfied, "highly_satisfied"},
    {Satisfaction::kSatisfied, "satisfied"},
    {Satisfaction::kUnsatisfied, "unsatisfied"},
    {Satisfaction::kHighlyUnsatisfied, "highly_unsatisfied"},
}};

constexpr std::array<std::pair<Satisfaction, std::string_view>, 4> kSatisfactionLabels{{
    {Satisfaction::kHighlySatisfied, "highly satisfied"},
    {Satisfaction::kSatisfied, "satisfied"},
    {Satisfaction::kUnsatisfied, "unsatisfied"},
    {Satisfaction::kHighlyUnsatisfied, "highly unsatisfied"},
}};

struct ScqsLevelInfo {
    std::string_view name;
    std::string_view definition;
};

constexpr std::array<ScqsLevelInfo, kScqsLevelCount> kScqsLevels{{
    {"Semantic Collapse", "complete failure at both the understanding and the generation level"},
    {"Key Omission", "linguistically coherent but fails to accurately cover the key information"},
    {"Key Completion", "answers the core of the question accurately with clear semantics"},
    {"Informative Excellence", "correct and complete output with a high-quality language structure"},
}};

}  // namespace

std::string_view to_string(SegmentKind kind) { return name_of(kSegmentKinds, kind); }
std::string_view to_string(FirstOrderDimension dim) { return name_of(kDimensions, dim); }
std::string_view to_string(Superior z) { return name_of(kSuperior, z); }
std::string_view to_string(Preference p) { return name_of(kPreference, p); }
std::string_view to_string(Satisfaction s) { return name_of(kSatisfactionIds, s); }
std::string_view display_label(Satisfaction s) { return name_of(kSatisfactionLabels, s); }

std::optional<SegmentKind> parse_segment_kind(std::string_view text) {
    return lookup(kSegmentKinds, text);
}
// Any casing is accepted ("study", "Study").
std::optional<FirstOrderDimension> parse_first_order_dimension(std::string_view text) {
    for (const auto& [value, name] : kDimensions) {
        if (name.size() == text.size() &&
            std::equal(name.begin(), name.end(), text.begin(), [](char a, char b) {
                return std::tolower(static_cast<unsigned char>(a)) ==
                       std::tolower(static_cast<unsigned char>(b));
            })) {
            return value;
        }
    }
    return std::nullopt;
}
std::optional<Superior> parse_superior(std::string_view text) { return lookup(kSuperior, text); }
std::optional<Preference> parse_preference(std::string_view text) {
    return lookup(kPreference, text);
}
std::optional<Satisfaction> parse_satisfaction(std::string_view text) {
    if (auto s = lookup(kSatisfactionIds, text)) return s;
    return lookup(kSatisfactionLabels, text);
}

bool requires_causes(Satisfaction s) {
    return s == Satisfaction::kUnsatisfied || s == Satisfaction::kHighlyUnsatisfied;
}

ScqsLabel ScqsLabel::from_level(int level) {
    if (level < 0 || level >= kScqsLevelCount) {
        throw RangeError("SCQS level must be in 0..3, got " + std::to_string(level));
    }
    return ScqsLabel(level);
}

std::optional<ScqsLabel> ScqsLabel::from_name(std::string_view name) {
    for (int level = 0; level < kScqsLevelCount; ++level) {
        if (kScqsLevels[level].name == name) return ScqsLabel(level);
    }
    return std::nullopt;
}

std::string_view ScqsLabel::name() const { return kScqsLevels[level_].name; }
std::string_view ScqsLabel::definition() const { return kScqsLevels[level_].definition; }

ScqsLabel scqs_from_level(int level) { return ScqsLabel::from_level(level); }

// ---------------------------------------------------------------------------

void TaskTypeConfig::validate() const {
    if (task_id.empty()) throw ValidationError("task_id must not be empty");
    if (dimension_names.empty()) {
        throw ValidationError("task '" + task_id + "' must define at least one dimension");
    }
    if (prompt_template_ref.empty()) {
        throw ValidationError("task '" + task_id + "' has an empty prompt_template_ref");
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : dimension_names) {
        if (name.empty()) {
            throw ValidationError("task '" + task_id + "' has an empty dimension name");
        }
        if (!seen.insert(name).second) {
            throw ValidationError("task '" + task_id + "' repeats dimension '" + name + "'");
        }
    }
}

const TaskTypeConfig& TaskRegistry::register_task_type(TaskTypeConfig config) {
    config.validate();
    if (configs_.contains(config.task_id)) {
        throw DuplicateError("task type '" + config.task_id + "' is already registered");
    }
    auto key = config.task_id;
    return configs_.emplace(std::move(key), std::move(config)).first->second;
}

const TaskTypeConfig* TaskRegistry::find(std::string_view task_id) const {
    auto it = configs_.find(task_id);
    return it == configs_.end() ? nullptr : &it->second;
}

const TaskTypeConfig& TaskRegistry::at(std::string_view task_id) const {
    if (const auto* config = find(task_id)) return *config;
    throw NotFoundError("unknown task_id '" + std::string(task_id) + "'");
}

std::vector<const TaskTypeConfig*> TaskRegistry::all() const {
    std::vector<const TaskTypeConfig*> out;
    out.reserve(configs_.size());
    for (const auto& [id, config] : configs_) out.push_back(&config);
    return out;
}

TagVocabulary::TagVocabulary(std::vector<Tag> tags) {
    for (auto& tag : tags) add(std::move(tag));
}

void TagVocabulary::add(Tag tag) {
    if (tag.tag_id.empty()) throw ValidationError("tag_id must not be empty");
    if (contains(tag.tag_id)) throw DuplicateError("tag '" + tag.tag_id + "' already exists");
    tags_.push_back(std::move(tag));
}

bool TagVocabulary::contains(std::string_view tag_id) const {
    return std::any_of(tags_.begin(), tags_.end(),
                       [&](const Tag& t) { return t.tag_id == tag_id; });
}

TaskRegistry default_task_registry() {
    TaskRegistry registry;
    registry.register_task_type({"equipment", "Device control",
                                 {"intent_understanding", "execution", "feedback_clarity"}});
    registry.register_task_type({"socializing", "Social companionship",
                                 {"empathy", "relevance", "naturalness"}});
    registry.register_task_type({"life", "Daily life services",
                                 {"accuracy", "practicality", "clarity"}});
    registry.register_task_type({"study", "Learning assistance",
                                 {"accuracy", "completeness", "clarity"}});
    registry.register_task_type({"entertainment", "Entertainment",
                                 {"relevance", "creativity", "naturalness"}});
    registry.register_task_type({"information", "Information lookup",
                                 {"accuracy", "completeness", "timeliness"}});
    return registry;
}

TagVocabulary default_error_taxonomy() {
    return TagVocabulary({
        {"information_omission", "key information required by the request is missing"},
        {"factual_error", "states something factually wrong"},
        {"semantic_drift", "drifts away from the meaning of the request"},
        {"redundancy", "repeats content or pads the answer"},
        {"verbose_elaboration", "elaborates far beyond what the request needs"},
        {"logical_inconsistency", "contradicts itself or reasons incoherently"},
        {"task_not_completed", "does not carry out the requested task"},
    });
}

TagVocabulary default_cause_vocabulary() {
    return TagVocabulary({
        {"accurate_content", "content is correct"},
        {"complete_content", "covers everything the user asked for"},
        {"natural_language", "reads naturally and fluently"},
        {"clear_information", "information is clear and easy to scan"},
        {"focused", "stays on what the user cares about"},
        {"inaccurate_content", "content is wrong or misleading"},
        {"incomplete_content", "misses part of the request"},
        {"unnatural_language", "stiff, robotic or awkward phrasing"},
        {"unclear_information", "hard to extract the needed information"},
        {"lacks_focus", "wanders or buries the answer"},
        {"verbose", "much longer than needed"},
        {"task_not_completed", "the requested action was not performed"},
        {"cold_tone", "tone does not fit the conversation"},
    });
}

namespace {

std::vector<Tag> tags_from_json(const Json& array, const char* what) {
    if (!array.is_array()) throw ValidationError(std::string(what) + " must be an array");
    std::vector<Tag> out;
    for (const auto& item : array) {
        if (!item.is_object() || !item.contains("tag_id") || !item["tag_id"].is_string()) {
            throw ValidationError(std::string(what) + " entries need a string tag_id");
        }
        out.push_back({item["tag_id"].get<std::string>(), item.value("description", "")});
    }
    return out;
}

}  // namespace

EvaluationConfig EvaluationConfig::from_json(const Json& doc) {
    if (!doc.is_object()) throw ValidationError("evaluation config must be a JSON object");
    EvaluationConfig config;
    if (doc.contains("tasks")) {
        if (!doc["tasks"].is_array()) throw ValidationError("tasks must be an array");
        for (const auto& t : doc["tasks"]) {
            TaskTypeConfig task;
            try {
                task.task_id = t.at("task_id").get<std::string>();
                task.display_name = t.value("display_name", task.task_id);
                task.dimension_names = t.at("dimension_names").get<std::vector<std::string>>();
                task.prompt_template_ref =
                    t.value("prompt_template_ref", std::string("interaction.default"));
            } catch (const Json::exception& e) {
                throw ValidationError(std::string("invalid task config: ") + e.what());
            }
            config.tasks.register_task_type(std::move(task));
        }
    }
    if (doc.contains("error_tags")) {
        for (auto& tag : tags_from_json(doc["error_tags"], "error_tags")) {
            config.error_tags.add(std::move(tag));
        }
    }
    if (doc.contains("cause_tags")) {
        for (auto& tag : tags_from_json(doc["cause_tags"], "cause_tags")) {
            config.cause_tags.add(std::move(tag));
        }
    }
    return config;
}

EvaluationConfig EvaluationConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open evaluation config '" + path + "'");
    Json doc = Json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ValidationError("evaluation config '" + path + "' is not JSON");
    return from_json(doc);
}

// ---------------------------------------------------------------------------

std::vector<std::string> EvaluationSample::system_ids() const {
    std::vector<std::string> ids;
    ids.reserve(responses.size());
    for (const auto& [id, text] : responses) ids.push_back(id);
    return ids;
}

bool EvaluationSample::has_system(std::string_view system_id) const {
    return responses.find(std::string(system_id)) != responses.end();
}

void validate_segment(const ModalSegment& segment) {
    switch (segment.kind) {
        case SegmentKind::kDialogueTurn:
        case SegmentKind::kVoiceTranscript:
            if (segment.text.empty()) {
                throw ValidationError(std::string(to_string(segment.kind)) +
                                      " segment needs non-empty text");
            }
            if (!segment.labels.empty() || !segment.salient_regions.empty()) {
                throw ValidationError(std::string(to_string(segment.kind)) +
                                      " segment cannot carry labels or salient regions");
            }
            break;
        case SegmentKind::kImageDescriptor:
            if (segment.text.empty() && segment.labels.empty()) {
                throw ValidationError("image_descriptor segment needs a caption or labels");
            }
            break;
    }
}

void validate_sample(const EvaluationSample& sample, const TaskRegistry& tasks) {
    if (sample.sample_id.empty()) throw ValidationError("sample_id must not be empty");
    const std::string where = "sample '" + sample.sample_id + "': ";
    if (!tasks.find(sample.task_id)) {
        throw ValidationError(where + "unknown task_id '" + sample.task_id + "'");
    }
    if (sample.input_segments.empty()) throw ValidationError(where + "no input segments");
    std::unordered_set<std::size_t> indices;
    for (const auto& segment : sample.input_segments) {
        try {
            validate_segment(segment);
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        }
        if (!indices.insert(segment.order_index).second) {
            throw ValidationError(where + "duplicate order_index " +
                                  std::to_string(segment.order_index));
        }
    }
    if (sample.responses.empty()) throw ValidationError(where + "responses must not be empty");
    for (const auto& [system_id, text] : sample.responses) {
        if (system_id.empty()) throw ValidationError(where + "empty system_id");
        if (system_id.find('|') != std::string::npos) {
            throw ValidationError(where + "system_id may not contain '|'");
        }
    }
}

std::string Target::to_string() const {
    return system_b ? system_a + "|" + *system_b : system_a;
}

double DimensionScores::mean() const {
    if (scores.empty()) return 0.0;
    return std::accumulate(scores.begin(), scores.end(), 0.0) /
           static_cast<double>(scores.size());
}

void validate_scores(const DimensionScores& scores, const TaskTypeConfig& task) {
    if (scores.scores.size() != task.k()) {
        throw ValidationError("expected " + std::to_string(task.k()) + " dimension scores for task '" +
                              task.task_id + "', got " + std::to_string(scores.scores.size()));
    }
    for (double s : scores.scores) {
        if (!std::isfinite(s) || s < 0.0 || s > 100.0) {
            throw ValidationError("dimension score out of range [0, 100]: " + std::to_string(s));
        }
    }
}

void validate_comparison(const ComparisonVerdict& verdict, const TagVocabulary& taxonomy) {
    if (verdict.system_a == verdict.system_b) {
        throw ValidationError("comparison needs two distinct systems");
    }
    if (verdict.consistency != 0 && verdict.consistency != 1) {
        throw ValidationError("consistency must be 0 or 1");
    }
    for (const auto& tag : verdict.error_attributions) {
        if (!taxonomy.contains(tag)) throw ValidationError("unknown error tag '" + tag + "'");
    }
}

void validate_satisfaction(const SatisfactionVerdict& verdict, const TagVocabulary& causes) {
    if (requires_causes(verdict.satisfaction) && verdict.causes.empty()) {
        throw ValidationError(std::string("satisfaction '") +
                              std::string(to_string(verdict.satisfaction)) +
                              "' requires at least one cause");
    }
    for (const auto& cause : verdict.causes) {
        if (!causes.contains(cause)) throw ValidationError("unknown cause tag '" + cause + "'");
    }
}

}  // namespace agenteval
