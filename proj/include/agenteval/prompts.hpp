#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "agenteval/core.hpp"
#include "agenteval/ingestion.hpp"

namespace agenteval {

enum class Stage { kInteraction, kSemantic, kExperienceSingle, kExperiencePair };

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);

// Numeric tier (1, 2 or 3) a stage belongs to.
int tier_of(Stage stage);

struct PromptText {
    Stage stage = Stage::kInteraction;
    std::string body;
    std::optional<std::string> task_id;
    std::string schema_hint;  // always a substring of body

    bool operator==(const PromptText&) const = default;
};

// One prompt template. The id's prefix before the first '.' names the stage
// ("interaction.default", "semantic.default", ...).
struct PromptTemplate {
    std::string id;
    Stage stage = Stage::kInteraction;
    int version = 1;
    std::string text;
};

// Read-only after load. Every template is checked on insertion: unknown or
// stage-inappropriate placeholders and missing required ones are errors.
class TemplateRegistry {
public:
    // The built-in templates (identical to the files shipped in templates/).
    static TemplateRegistry defaults();

    // Built-in templates overridden/extended by every `<id>.txt` in `dir`.
    // Throws ValidationError naming the offending file.
    static TemplateRegistry load_directory(const std::filesystem::path& dir);

    // Parses an optional leading "##version <n>" line. Throws ValidationError.
    static PromptTemplate parse(std::string id, std::string_view file_text);

    void add(PromptTemplate tmpl);
    const PromptTemplate* find(std::string_view id) const;
    const PromptTemplate& at(std::string_view id) const;  // NotFoundError
    std::vector<std::string> ids() const;

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

// The default template text for `id`, as shipped in templates/<id>.txt.
std::string default_template_text(std::string_view id);

// Replaces {{name}} placeholders in one pass; substituted values are never
// rescanned. Throws ValidationError on a placeholder missing from `values`.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

// Stage prompt constructors. Pure and deterministic.
class PromptBuilder {
public:
    PromptBuilder(const TemplateRegistry& templates, const EvaluationConfig& config)
        : templates_(templates), config_(config) {}

    // Throws NotFoundError when the task or its template is not registered.
    PromptText build_interaction_prompt(const TaskTypeConfig& task, const NormalizedInput& input,
                                        std::string_view response) const;
    PromptText build_semantic_prompt(const NormalizedInput& input, std::string_view response_a,
                                     std::string_view response_b) const;
    // Throws ValidationError on an empty response.
    PromptText build_experience_single_prompt(std::string_view response) const;
    PromptText build_experience_pair_prompt(std::string_view response_a,
                                            std::string_view response_b) const;

    std::string interaction_schema_hint(const TaskTypeConfig& task) const;
    static std::string semantic_schema_hint();
    static std::string experience_single_schema_hint();
    static std::string experience_pair_schema_hint();

private:
    const TemplateRegistry& templates_;
    const EvaluationConfig& config_;
};

}  // namespace agenteval
