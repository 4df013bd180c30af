#include "agenteval/parsers.hpp"

#include <cmath>

namespace agenteval {

namespace {

// Parses `text` as JSON without exceptions and with a nesting cap, since
// model output is untrusted.
constexpr std::size_t kMaxDepth = 64;

std::optional<Json> parse_bounded(std::string_view text) {
    std::size_t depth = 0;
    bool too_deep = false;
    Json::parser_callback_t guard = [&](int, Json::parse_event_t event, Json&) {
        if (event == Json::parse_event_t::object_start ||
            event == Json::parse_event_t::array_start) {
            if (++depth > kMaxDepth) too_deep = true;
        } else if (event == Json::parse_event_t::object_end ||
                   event == Json::parse_event_t::array_end) {
            --depth;
        }
        return !too_deep;
    };
    Json doc = Json::parse(text.begin(), text.end(), guard, false);
    if (doc.is_discarded() || too_deep) return std::nullopt;
    return doc;
}

// End offset (one past the closing brace) of the balanced object starting
// at `open`, honoring JSON string literals and escapes.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t open) {
    std::size_t depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (depth == 0) return std::nullopt;
            if (--depth == 0) return i + 1;
        }
    }
    return std::nullopt;
}

template <typename V>
ParseOutcome<V> failed(std::vector<std::string> diagnostics, std::string message) {
    diagnostics.push_back(std::move(message));
    return {ParseStatus::kFailed, std::nullopt, std::move(diagnostics)};
}

template <typename V>
ParseOutcome<V> succeeded(V verdict, bool repaired, std::vector<std::string> diagnostics) {
    return {repaired ? ParseStatus::kRepaired : ParseStatus::kOk, std::move(verdict),
            std::move(diagnostics)};
}

// Optional free-text field; non-string values are rejected.
bool read_text(const Json& doc, const char* key, std::string& out, std::vector<std::string>& diag) {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return true;
    if (!it->is_string()) {
        diag.push_back(std::string("'") + key + "' must be a string");
        return false;
    }
    out = it->get<std::string>();
    return true;
}

// Reads a tag list. Returns false when the parse must fail.
bool read_tags(const Json& doc, const char* key, const TagVocabulary& vocabulary, TagPolicy policy,
               std::set<std::string>& out, bool& dropped, std::vector<std::string>& diag) {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return true;
    if (!it->is_array()) {
        diag.push_back(std::string("'") + key + "' must be an array of tag ids");
        return false;
    }
    for (const auto& item : *it) {
        if (!item.is_string()) {
            diag.push_back(std::string("'") + key + "' must contain only strings");
            return false;
        }
        auto tag = item.get<std::string>();
        if (!vocabulary.contains(tag)) {
            if (policy == TagPolicy::kStrict) {
                diag.push_back("unknown tag '" + tag + "' in '" + key + "'");
                return false;
            }
            diag.push_back("dropped unknown tag '" + tag + "'");
            dropped = true;
            continue;
        }
        out.insert(std::move(tag));
    }
    return true;
}

}  // namespace

std::string_view to_string(ParseStatus status) {
    switch (status) {
        case ParseStatus::kOk: return "ok";
        case ParseStatus::kRepaired: return "repaired";
        case ParseStatus::kFailed: return "failed";
    }
    return "?";
}

std::optional<ExtractedObject> extract_json_object(std::string_view raw,
                                                   std::vector<std::string>& diagnostics) {
    if (auto direct = parse_bounded(raw); direct && direct->is_object()) {
        return ExtractedObject{std::move(*direct), false};
    }
    for (std::size_t open = raw.find('{'); open != std::string_view::npos;
         open = raw.find('{', open + 1)) {
        auto end = balanced_end(raw, open);
        if (!end) continue;
        if (auto doc = parse_bounded(raw.substr(open, *end - open)); doc && doc->is_object()) {
            diagnostics.push_back("extracted JSON object from surrounding text");
            return ExtractedObject{std::move(*doc), true};
        }
    }
    diagnostics.push_back("no JSON object found in model output");
    return std::nullopt;
}

ParseOutcome<InteractionVerdict> parse_interaction_output(std::string_view raw,
                                                          const TaskTypeConfig& task) {
    using V = InteractionVerdict;
    std::vector<std::string> diag;
    auto extracted = extract_json_object(raw, diag);
    if (!extracted) return {ParseStatus::kFailed, std::nullopt, diag};
    const Json& doc = extracted->object;

    V verdict;
    verdict.dimension_scores.task_id = task.task_id;

    auto scores = doc.find("scores");
    if (scores == doc.end()) return failed<V>(diag, "missing 'scores'");
    if (scores->is_array()) {
        for (const auto& s : *scores) {
            if (!s.is_number()) return failed<V>(diag, "'scores' must contain only numbers");
            verdict.dimension_scores.scores.push_back(s.get<double>());
        }
    } else if (scores->is_object()) {
        if (scores->size() != task.k()) {
            return failed<V>(diag, "arity: expected " + std::to_string(task.k()) +
                                       " scores, got " + std::to_string(scores->size()));
        }
        for (const auto& name : task.dimension_names) {
            auto it = scores->find(name);
            if (it == scores->end()) return failed<V>(diag, "missing score for dimension '" + name + "'");
            if (!it->is_number()) return failed<V>(diag, "score for '" + name + "' must be a number");
            verdict.dimension_scores.scores.push_back(it->get<double>());
        }
    } else {
        return failed<V>(diag, "'scores' must be an array or an object");
    }
    if (verdict.dimension_scores.scores.size() != task.k()) {
        return failed<V>(diag, "arity: expected " + std::to_string(task.k()) + " scores, got " +
                                   std::to_string(verdict.dimension_scores.scores.size()));
    }
    for (double s : verdict.dimension_scores.scores) {
        if (!std::isfinite(s) || s < 0.0 || s > 100.0) {
            return failed<V>(diag, "score out of range [0, 100]");
        }
    }

    auto level = doc.find("level");
    if (level == doc.end()) return failed<V>(diag, "missing 'level'");
    if (level->is_number_integer()) {
        auto l = level->get<long long>();
        if (l < 0 || l >= kScqsLevelCount) return failed<V>(diag, "level out of range 0..3");
        verdict.quality = ScqsLabel::from_level(static_cast<int>(l));
    } else if (level->is_string()) {
        auto label = ScqsLabel::from_name(level->get<std::string>());
        if (!label) return failed<V>(diag, "unknown SCQS level name");
        verdict.quality = *label;
    } else {
        return failed<V>(diag, "'level' must be an integer 0..3 or an SCQS level name");
    }

    if (!read_text(doc, "rationale", verdict.rationale, diag)) {
        return {ParseStatus::kFailed, std::nullopt, diag};
    }
    return succeeded(std::move(verdict), extracted->repaired, std::move(diag));
}

ParseOutcome<ComparisonVerdict> parse_semantic_output(std::string_view raw,
                                                      const TagVocabulary& taxonomy,
                                                      TagPolicy policy) {
    using V = ComparisonVerdict;
    std::vector<std::string> diag;
    auto extracted = extract_json_object(raw, diag);
    if (!extracted) return {ParseStatus::kFailed, std::nullopt, diag};
    const Json& doc = extracted->object;

    V verdict;
    auto y = doc.find("y");
    if (y == doc.end()) return failed<V>(diag, "missing 'y'");
    if (!y->is_number_integer()) return failed<V>(diag, "'y' must be the integer 0 or 1");
    auto y_value = y->get<long long>();
    if (y_value != 0 && y_value != 1) return failed<V>(diag, "domain: 'y' must be 0 or 1");
    verdict.consistency = static_cast<int>(y_value);

    auto z = doc.find("z");
    if (z == doc.end()) return failed<V>(diag, "missing 'z'");
    if (!z->is_string()) return failed<V>(diag, "'z' must be \"A\", \"B\" or \"equivalent\"");
    auto superior = parse_superior(z->get<std::string>());
    if (!superior) return failed<V>(diag, "domain: 'z' must be \"A\", \"B\" or \"equivalent\"");
    verdict.superior = *superior;

    bool dropped = false;
    if (!read_tags(doc, "errors", taxonomy, policy, verdict.error_attributions, dropped, diag) ||
        !read_text(doc, "rationale", verdict.rationale, diag)) {
        return {ParseStatus::kFailed, std::nullopt, diag};
    }
    return succeeded(std::move(verdict), extracted->repaired || dropped, std::move(diag));
}

ParseOutcome<SatisfactionVerdict> parse_experience_single(std::string_view raw,
                                                          const TagVocabulary& causes,
                                                          TagPolicy policy) {
    using V = SatisfactionVerdict;
    std::vector<std::string> diag;
    auto extracted = extract_json_object(raw, diag);
    if (!extracted) return {ParseStatus::kFailed, std::nullopt, diag};
    const Json& doc = extracted->object;

    V verdict;
    auto label = doc.find("satisfaction");
    if (label == doc.end()) return failed<V>(diag, "missing 'satisfaction'");
    if (!label->is_string()) return failed<V>(diag, "'satisfaction' must be a string");
    auto satisfaction = parse_satisfaction(label->get<std::string>());
    if (!satisfaction) {
        return failed<V>(diag, "unknown satisfaction label '" + label->get<std::string>() + "'");
    }
    verdict.satisfaction = *satisfaction;

    bool dropped = false;
    if (!read_tags(doc, "causes", causes, policy, verdict.causes, dropped, diag) ||
        !read_text(doc, "explanation", verdict.explanation, diag)) {
        return {ParseStatus::kFailed, std::nullopt, diag};
    }
    if (requires_causes(verdict.satisfaction) && verdict.causes.empty()) {
        return failed<V>(diag, "cause required: label '" +
                                   std::string(display_label(verdict.satisfaction)) +
                                   "' needs at least one cause");
    }
    return succeeded(std::move(verdict), extracted->repaired || dropped, std::move(diag));
}

ParseOutcome<PreferenceVerdict> parse_experience_pair(std::string_view raw) {
    using V = PreferenceVerdict;
    std::vector<std::string> diag;
    auto extracted = extract_json_object(raw, diag);
    if (!extracted) return {ParseStatus::kFailed, std::nullopt, diag};
    const Json& doc = extracted->object;

    V verdict;
    auto preferred = doc.find("preferred");
    if (preferred == doc.end()) return failed<V>(diag, "missing 'preferred'");
    if (!preferred->is_string()) return failed<V>(diag, "'preferred' must be a string");
    auto value = parse_preference(preferred->get<std::string>());
    if (!value) return failed<V>(diag, "domain: 'preferred' must be \"A\", \"B\" or \"tie\"");
    verdict.preferred = *value;
    if (!read_text(doc, "rationale", verdict.rationale, diag)) {
        return {ParseStatus::kFailed, std::nullopt, diag};
    }
    return succeeded(std::move(verdict), extracted->repaired, std::move(diag));
}

Json interaction_output(const std::vector<double>& scores, const ScqsLabel& quality,
                        const std::string& rationale) {
    return {{"scores", scores}, {"level", quality.level()}, {"rationale", rationale}};
}

Json semantic_output(int consistency, Superior superior, const std::set<std::string>& errors,
                     const std::string& rationale) {
    return {{"y", consistency},
            {"z", to_string(superior)},
            {"errors", Json(std::vector<std::string>(errors.begin(), errors.end()))},
            {"rationale", rationale}};
}

Json experience_single_output(Satisfaction satisfaction, const std::set<std::string>& causes,
                              const std::string& explanation) {
    return {{"satisfaction", display_label(satisfaction)},
            {"causes", Json(std::vector<std::string>(causes.begin(), causes.end()))},
            {"explanation", explanation}};
}

Json experience_pair_output(Preference preferred, const std::string& rationale) {
    return {{"preferred", to_string(preferred)}, {"rationale", rationale}};
}

}  // namespace agenteval
