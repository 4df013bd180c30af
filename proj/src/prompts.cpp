#include "agenteval/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "agenteval/errors.hpp"

namespace agenteval {

namespace {

struct BuiltinTemplate {
    const char* id;
    const char* text;
};

// Generated at configure time from templates/*.txt.
constexpr BuiltinTemplate kBuiltinTemplates[] = {
#include "default_templates.inc"
};

struct StagePlaceholders {
    std::set<std::string> required;
    std::set<std::string> optional;
};

const StagePlaceholders& placeholders_for(Stage stage) {
    static const StagePlaceholders kInteraction{
        {"input", "response", "dimensions", "scqs_levels", "schema_hint"}, {"task_name"}};
    static const StagePlaceholders kSemantic{
        {"input", "response_a", "response_b", "error_tags", "schema_hint"}, {}};
    static const StagePlaceholders kSingle{
        {"response", "satisfaction_labels", "schema_hint"}, {"cause_tags"}};
    static const StagePlaceholders kPair{{"response_a", "response_b", "schema_hint"}, {}};
    switch (stage) {
        case Stage::kInteraction: return kInteraction;
        case Stage::kSemantic: return kSemantic;
        case Stage::kExperienceSingle: return kSingle;
        case Stage::kExperiencePair: return kPair;
    }
    return kPair;
}

// Names of every {{placeholder}} in order of appearance. Throws on an
// unterminated "{{".
std::vector<std::string> scan_placeholders(std::string_view text) {
    std::vector<std::string> names;
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string_view::npos) {
        auto end = text.find("}}", pos + 2);
        if (end == std::string_view::npos) throw ValidationError("unterminated '{{' placeholder");
        names.emplace_back(text.substr(pos + 2, end - pos - 2));
        pos = end + 2;
    }
    return names;
}

}  // namespace

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::kInteraction: return "interaction";
        case Stage::kSemantic: return "semantic";
        case Stage::kExperienceSingle: return "experience_single";
        case Stage::kExperiencePair: return "experience_pair";
    }
    return "?";
}

std::optional<Stage> parse_stage(std::string_view text) {
    for (Stage s : {Stage::kInteraction, Stage::kSemantic, Stage::kExperienceSingle,
                    Stage::kExperiencePair}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

int tier_of(Stage stage) {
    switch (stage) {
        case Stage::kInteraction: return 1;
        case Stage::kSemantic: return 2;
        case Stage::kExperienceSingle:
        case Stage::kExperiencePair: return 3;
    }
    return 0;
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size() * 2);
    std::size_t pos = 0;
    while (true) {
        auto open = text.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) throw ValidationError("unterminated '{{' placeholder");
        out.append(text.substr(pos, open - pos));
        std::string name(text.substr(open + 2, close - open - 2));
        auto it = values.find(name);
        if (it == values.end()) throw ValidationError("unresolved placeholder {{" + name + "}}");
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

// ---------------------------------------------------------------------------

PromptTemplate TemplateRegistry::parse(std::string id, std::string_view file_text) {
    PromptTemplate tmpl;
    auto dot = id.find('.');
    auto stage = parse_stage(std::string_view(id).substr(0, dot));
    if (!stage) throw ValidationError("template '" + id + "': id must start with a stage name");
    tmpl.stage = *stage;
    tmpl.id = std::move(id);

    constexpr std::string_view kVersionTag = "##version ";
    if (file_text.substr(0, kVersionTag.size()) == kVersionTag) {
        auto eol = file_text.find('\n');
        auto number = std::string(file_text.substr(kVersionTag.size(), eol - kVersionTag.size()));
        try {
            std::size_t used = 0;
            tmpl.version = std::stoi(number, &used);
            if (used != number.size() || tmpl.version < 1) throw std::invalid_argument(number);
        } catch (const std::exception&) {
            throw ValidationError("template '" + tmpl.id + "': bad version line");
        }
        file_text = eol == std::string_view::npos ? std::string_view() : file_text.substr(eol + 1);
    }
    tmpl.text = std::string(file_text);
    return tmpl;
}

void TemplateRegistry::add(PromptTemplate tmpl) {
    const auto& allowed = placeholders_for(tmpl.stage);
    const std::string where = "template '" + tmpl.id + "': ";
    std::vector<std::string> names;
    try {
        names = scan_placeholders(tmpl.text);
    } catch (const ValidationError& e) {
        throw ValidationError(where + e.what());
    }
    std::set<std::string> present(names.begin(), names.end());
    for (const auto& name : present) {
        if (!allowed.required.contains(name) && !allowed.optional.contains(name)) {
            throw ValidationError(where + "unresolved placeholder {{" + name + "}}");
        }
    }
    for (const auto& name : allowed.required) {
        if (!present.contains(name)) {
            throw ValidationError(where + "missing required placeholder {{" + name + "}}");
        }
    }
    if (std::count(names.begin(), names.end(), "schema_hint") != 1) {
        throw ValidationError(where + "{{schema_hint}} must appear exactly once");
    }
    auto key = tmpl.id;
    templates_.insert_or_assign(std::move(key), std::move(tmpl));
}

TemplateRegistry TemplateRegistry::defaults() {
    TemplateRegistry registry;
    for (const auto& builtin : kBuiltinTemplates) {
        registry.add(parse(builtin.id, builtin.text));
    }
    return registry;
}

TemplateRegistry TemplateRegistry::load_directory(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw NotFoundError("template directory '" + dir.string() + "' not found");
    TemplateRegistry registry = defaults();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        std::stringstream buffer;
        buffer << in.rdbuf();
        try {
            registry.add(parse(path.stem().string(), buffer.str()));
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ": " + e.what());
        }
    }
    return registry;
}

const PromptTemplate* TemplateRegistry::find(std::string_view id) const {
    auto it = templates_.find(id);
    return it == templates_.end() ? nullptr : &it->second;
}

const PromptTemplate& TemplateRegistry::at(std::string_view id) const {
    if (const auto* t = find(id)) return *t;
    throw NotFoundError("unknown prompt template '" + std::string(id) + "'");
}

std::vector<std::string> TemplateRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, t] : templates_) out.push_back(id);
    return out;
}

std::string default_template_text(std::string_view id) {
    for (const auto& builtin : kBuiltinTemplates) {
        if (builtin.id == id) return builtin.text;
    }
    throw NotFoundError("no built-in template '" + std::string(id) + "'");
}

// ---------------------------------------------------------------------------

std::string PromptBuilder::interaction_schema_hint(const TaskTypeConfig& task) const {
    std::string scores;
    for (std::size_t i = 0; i < task.dimension_names.size(); ++i) {
        if (i) scores += ", ";
        scores += "<" + task.dimension_names[i] + " score>";
    }
    return "Reply with exactly one JSON object and nothing else, in this form: "
           "{\"scores\": [" + scores + "], \"level\": <SCQS level 0-3>, "
           "\"rationale\": \"<brief justification>\"} where every score is a number "
           "from 0 to 100.";
}

std::string PromptBuilder::semantic_schema_hint() {
    return "Reply with exactly one JSON object and nothing else, in this form: "
           "{\"y\": <0 or 1>, \"z\": \"A\" | \"B\" | \"equivalent\", "
           "\"errors\": [<error tag ids>], \"rationale\": \"<brief justification>\"}";
}

std::string PromptBuilder::experience_single_schema_hint() {
    return "Reply with exactly one JSON object and nothing else, in this form: "
           "{\"satisfaction\": \"<one satisfaction label>\", \"causes\": [<cause tag ids>], "
           "\"explanation\": \"<why the user would feel this way>\"}. At least one cause is "
           "required when the label is unsatisfied or highly unsatisfied.";
}

std::string PromptBuilder::experience_pair_schema_hint() {
    return "Reply with exactly one JSON object and nothing else, in this form: "
           "{\"preferred\": \"A\" | \"B\" | \"tie\", \"rationale\": \"<brief justification>\"}";
}

PromptText PromptBuilder::build_interaction_prompt(const TaskTypeConfig& task,
                                                   const NormalizedInput& input,
                                                   std::string_view response) const {
    const TaskTypeConfig& registered = config_.tasks.at(task.task_id);
    const PromptTemplate& tmpl = templates_.at(registered.prompt_template_ref);
    if (tmpl.stage != Stage::kInteraction) {
        throw ValidationError("template '" + tmpl.id + "' is not an interaction template");
    }
    std::string dimensions;
    for (std::size_t i = 0; i < registered.dimension_names.size(); ++i) {
        dimensions += std::to_string(i + 1) + ". " + registered.dimension_names[i] + "\n";
    }
    dimensions.pop_back();
    std::string levels;
    for (int level = 0; level < kScqsLevelCount; ++level) {
        auto label = ScqsLabel::from_level(level);
        if (level) levels += "\n";
        levels += "Level " + std::to_string(level) + ": " + std::string(label.name()) + " - " +
                  std::string(label.definition());
    }
    auto hint = interaction_schema_hint(registered);
    auto body = render_template(tmpl.text, {
                                               {"task_name", registered.display_name},
                                               {"dimensions", dimensions},
                                               {"scqs_levels", levels},
                                               {"input", input.paragraph},
                                               {"response", std::string(response)},
                                               {"schema_hint", hint},
                                           });
    return {Stage::kInteraction, std::move(body), registered.task_id, std::move(hint)};
}

PromptText PromptBuilder::build_semantic_prompt(const NormalizedInput& input,
                                                std::string_view response_a,
                                                std::string_view response_b) const {
    const PromptTemplate& tmpl = templates_.at("semantic.default");
    std::string tags;
    for (const auto& tag : config_.error_tags.tags()) {
        if (!tags.empty()) tags += "\n";
        tags += "- " + tag.tag_id + ": " + tag.description;
    }
    auto hint = semantic_schema_hint();
    auto body = render_template(tmpl.text, {
                                               {"error_tags", tags},
                                               {"input", input.paragraph},
                                               {"response_a", std::string(response_a)},
                                               {"response_b", std::string(response_b)},
                                               {"schema_hint", hint},
                                           });
    return {Stage::kSemantic, std::move(body), std::nullopt, std::move(hint)};
}

PromptText PromptBuilder::build_experience_single_prompt(std::string_view response) const {
    if (response.empty()) throw ValidationError("cannot build an experience prompt for an empty response");
    const PromptTemplate& tmpl = templates_.at("experience_single.default");
    std::string labels;
    for (auto s : kAllSatisfactions) {
        if (!labels.empty()) labels += "\n";
        labels += "- " + std::string(display_label(s));
    }
    std::string causes;
    for (const auto& tag : config_.cause_tags.tags()) {
        if (!causes.empty()) causes += "\n";
        causes += "- " + tag.tag_id + ": " + tag.description;
    }
    auto hint = experience_single_schema_hint();
    auto body = render_template(tmpl.text, {
                                               {"satisfaction_labels", labels},
                                               {"cause_tags", causes},
                                               {"response", std::string(response)},
                                               {"schema_hint", hint},
                                           });
    return {Stage::kExperienceSingle, std::move(body), std::nullopt, std::move(hint)};
}

PromptText PromptBuilder::build_experience_pair_prompt(std::string_view response_a,
                                                       std::string_view response_b) const {
    const PromptTemplate& tmpl = templates_.at("experience_pair.default");
    auto hint = experience_pair_schema_hint();
    auto body = render_template(tmpl.text, {
                                               {"response_a", std::string(response_a)},
                                               {"response_b", std::string(response_b)},
                                               {"schema_hint", hint},
                                           });
    return {Stage::kExperiencePair, std::move(body), std::nullopt, std::move(hint)};
}

}  // namespace agenteval
