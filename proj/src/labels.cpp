#include "agenteval/labels.hpp"

#include "agenteval/errors.hpp"
#include "json_fields.hpp"

namespace agenteval {

using detail::FieldReader;
using detail::strings_to_json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

LabelPayload payload_from_json(const Json& doc, int stage, const Target& target) {
    FieldReader r(doc, "label payload");
    if (stage == 1) {
        InteractionLabel p;
        auto level = r.integer("level");
        if (level < 0 || level >= kScqsLevelCount) throw ValidationError("label payload: level out of range");
        p.quality = ScqsLabel::from_level(static_cast<int>(level));
        if (const Json* scores = r.optional("scores"); scores && !scores->is_null()) {
            if (!scores->is_array()) r.fail("scores", "an array of numbers");
            std::vector<double> values;
            for (const auto& s : *scores) {
                if (!s.is_number()) r.fail("scores", "an array of numbers");
                values.push_back(s.get<double>());
            }
            p.scores = std::move(values);
        }
        p.rationale = r.string_or("rationale", "");
        r.leftovers(ParseMode::kStrict);
        return p;
    }
    if (stage == 2) {
        ComparisonLabel p;
        auto y = r.integer("consistency");
        if (y != 0 && y != 1) throw ValidationError("label payload: consistency must be 0 or 1");
        p.consistency = static_cast<int>(y);
        auto z = r.string("superior");
        auto parsed = parse_superior(z);
        if (!parsed) throw ValidationError("label payload: unknown superior '" + z + "'");
        p.superior = *parsed;
        p.error_attributions = r.string_set("error_attributions", false);
        p.rationale = r.string_or("rationale", "");
        r.leftovers(ParseMode::kStrict);
        return p;
    }
    if (stage == 3 && !target.is_pair()) {
        SatisfactionLabel p;
        auto s = r.string("satisfaction");
        auto parsed = parse_satisfaction(s);
        if (!parsed) throw ValidationError("label payload: unknown satisfaction '" + s + "'");
        p.satisfaction = *parsed;
        p.causes = r.string_set("causes", false);
        p.explanation = r.string_or("explanation", "");
        r.leftovers(ParseMode::kStrict);
        return p;
    }
    if (stage == 3) {
        PreferenceLabel p;
        auto v = r.string("preferred");
        auto parsed = parse_preference(v);
        if (!parsed) throw ValidationError("label payload: unknown preferred '" + v + "'");
        p.preferred = *parsed;
        p.rationale = r.string_or("rationale", "");
        r.leftovers(ParseMode::kStrict);
        return p;
    }
    throw ValidationError("label stage must be 1, 2 or 3");
}

}  // namespace

std::string to_string(const LabelKey& key) {
    return key.sample_id + "/" + std::to_string(key.stage) + "/" + key.target.to_string();
}

Json to_json(const LabelKey& key) {
    return {{"sample_id", key.sample_id}, {"stage", key.stage}, {"target", to_json(key.target)}};
}

Json to_json(const LabelPayload& payload) {
    return std::visit(
        overloaded{
            [](const InteractionLabel& p) {
                Json j = {{"level", p.quality.level()}, {"rationale", p.rationale}};
                if (p.scores) j["scores"] = *p.scores;
                return j;
            },
            [](const ComparisonLabel& p) {
                return Json{{"consistency", p.consistency},
                            {"superior", to_string(p.superior)},
                            {"error_attributions", strings_to_json(p.error_attributions)},
                            {"rationale", p.rationale}};
            },
            [](const SatisfactionLabel& p) {
                return Json{{"satisfaction", to_string(p.satisfaction)},
                            {"causes", strings_to_json(p.causes)},
                            {"explanation", p.explanation}};
            },
            [](const PreferenceLabel& p) {
                return Json{{"preferred", to_string(p.preferred)}, {"rationale", p.rationale}};
            },
        },
        payload);
}

Json to_json(const HumanLabel& label) {
    return {{"format_version", kFormatVersion},
            {"sample_id", label.sample_id},
            {"stage", label.stage},
            {"target", to_json(label.target)},
            {"payload", to_json(label.payload)},
            {"annotator_id", label.annotator_id},
            {"is_final", label.is_final}};
}

HumanLabel human_label_from_json(const Json& doc) {
    FieldReader r(doc, "human label");
    r.check_version();
    HumanLabel label;
    label.sample_id = r.string("sample_id");
    auto stage = r.integer("stage");
    if (stage < 1 || stage > 3) throw ValidationError("human label: stage must be 1, 2 or 3");
    label.stage = static_cast<int>(stage);
    label.target = target_from_json(r.required("target"));
    label.payload = payload_from_json(r.required("payload"), label.stage, label.target);
    label.annotator_id = r.string("annotator_id");
    if (const Json* f = r.optional("is_final")) {
        if (!f->is_boolean()) r.fail("is_final", "a boolean");
        label.is_final = f->get<bool>();
    }
    r.leftovers(ParseMode::kStrict);
    check_label_shape(label);
    return label;
}

void check_label_shape(const HumanLabel& label) {
    if (label.sample_id.empty()) throw ValidationError("label: empty sample_id");
    if (label.annotator_id.empty()) throw ValidationError("label: empty annotator_id");
    const bool pair = label.target.is_pair();
    if (pair && label.target.system_a == *label.target.system_b) {
        throw ValidationError("label: pair target needs two distinct systems");
    }
    bool fits = false;
    switch (label.stage) {
        case 1: fits = !pair && std::holds_alternative<InteractionLabel>(label.payload); break;
        case 2: fits = pair && std::holds_alternative<ComparisonLabel>(label.payload); break;
        case 3:
            fits = pair ? std::holds_alternative<PreferenceLabel>(label.payload)
                        : std::holds_alternative<SatisfactionLabel>(label.payload);
            break;
        default: break;
    }
    if (!fits) throw ValidationError("label: payload does not match stage " +
                                     std::to_string(label.stage) + " and its target");
}

void validate_label(const HumanLabel& label, const EvaluationSample& sample,
                    const EvaluationConfig& config) {
    check_label_shape(label);
    if (label.sample_id != sample.sample_id) throw ValidationError("label: sample mismatch");
    auto require_system = [&](const std::string& id) {
        if (!sample.has_system(id)) {
            throw ValidationError("label: sample '" + sample.sample_id + "' has no system '" + id + "'");
        }
    };
    require_system(label.target.system_a);
    if (label.target.system_b) require_system(*label.target.system_b);

    std::visit(overloaded{
                   [&](const InteractionLabel& p) {
                       if (p.scores) {
                           validate_scores({sample.task_id, *p.scores}, config.tasks.at(sample.task_id));
                       }
                   },
                   [&](const ComparisonLabel& p) {
                       for (const auto& tag : p.error_attributions) {
                           if (!config.error_tags.contains(tag)) {
                               throw ValidationError("label: unknown error tag '" + tag + "'");
                           }
                       }
                   },
                   [&](const SatisfactionLabel& p) {
                       SatisfactionVerdict v;
                       v.satisfaction = p.satisfaction;
                       v.causes = p.causes;
                       validate_satisfaction(v, config.cause_tags);
                   },
                   [](const PreferenceLabel&) {},
               },
               label.payload);
}

bool same_judgement(const LabelPayload& a, const LabelPayload& b) {
    if (a.index() != b.index()) return false;
    return std::visit(
        overloaded{
            [&](const InteractionLabel& x) {
                const auto& y = std::get<InteractionLabel>(b);
                return x.quality == y.quality && x.scores == y.scores;
            },
            [&](const ComparisonLabel& x) {
                const auto& y = std::get<ComparisonLabel>(b);
                return x.consistency == y.consistency && x.superior == y.superior &&
                       x.error_attributions == y.error_attributions;
            },
            [&](const SatisfactionLabel& x) {
                const auto& y = std::get<SatisfactionLabel>(b);
                return x.satisfaction == y.satisfaction && x.causes == y.causes;
            },
            [&](const PreferenceLabel& x) {
                return x.preferred == std::get<PreferenceLabel>(b).preferred;
            },
        },
        a);
}

std::string primary_label(const LabelPayload& payload) {
    return std::visit(overloaded{
                          [](const InteractionLabel& p) { return std::to_string(p.quality.level()); },
                          [](const ComparisonLabel& p) { return std::string(to_string(p.superior)); },
                          [](const SatisfactionLabel& p) {
                              return std::string(to_string(p.satisfaction));
                          },
                          [](const PreferenceLabel& p) { return std::string(to_string(p.preferred)); },
                      },
                      payload);
}

std::vector<LabelKey> annotation_targets(const EvaluationSample& sample) {
    std::vector<LabelKey> keys;
    const auto systems = sample.system_ids();
    for (const auto& s : systems) keys.push_back({sample.sample_id, 1, Target::single(s)});
    for (std::size_t i = 0; i < systems.size(); ++i) {
        for (std::size_t j = i + 1; j < systems.size(); ++j) {
            keys.push_back({sample.sample_id, 2, Target::pair(systems[i], systems[j])});
        }
    }
    for (const auto& s : systems) keys.push_back({sample.sample_id, 3, Target::single(s)});
    return keys;
}

}  // namespace agenteval
