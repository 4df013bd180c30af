#include "agenteval/sft.hpp"

#include <map>

#include "agenteval/errors.hpp"
#include "agenteval/ingestion.hpp"
#include "agenteval/parsers.hpp"
#include "json_fields.hpp"

namespace agenteval {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Stage agent_of(const LabelKey& key) {
    switch (key.stage) {
        case 1: return Stage::kInteraction;
        case 2: return Stage::kSemantic;
        default: return key.target.is_pair() ? Stage::kExperiencePair : Stage::kExperienceSingle;
    }
}

template <typename V>
V parsed_or_throw(ParseOutcome<V> outcome) {
    if (!outcome.succeeded()) {
        std::string why;
        for (const auto& d : outcome.diagnostics) why += (why.empty() ? "" : "; ") + d;
        throw ValidationError("target does not parse: " + why);
    }
    return std::move(*outcome.verdict);
}

}  // namespace

std::string sft_target(const LabelPayload& payload) {
    Json out = std::visit(
        overloaded{
            [](const InteractionLabel& p) {
                if (!p.scores) throw ValidationError("stage-1 label without dimension scores");
                return interaction_output(*p.scores, p.quality, p.rationale);
            },
            [](const ComparisonLabel& p) {
                return semantic_output(p.consistency, p.superior, p.error_attributions, p.rationale);
            },
            [](const SatisfactionLabel& p) {
                return experience_single_output(p.satisfaction, p.causes, p.explanation);
            },
            [](const PreferenceLabel& p) { return experience_pair_output(p.preferred, p.rationale); },
        },
        payload);
    return out.dump();
}

LabelPayload payload_from_target(int stage, bool pair_target, const std::string& target,
                                 const TaskTypeConfig& task, const EvaluationConfig& config) {
    switch (stage) {
        case 1: {
            const auto v = parsed_or_throw(parse_interaction_output(target, task));
            return InteractionLabel{v.quality, v.dimension_scores.scores, v.rationale};
        }
        case 2: {
            const auto v = parsed_or_throw(parse_semantic_output(target, config.error_tags));
            return ComparisonLabel{v.consistency, v.superior, v.error_attributions, v.rationale};
        }
        case 3:
            if (pair_target) {
                const auto v = parsed_or_throw(parse_experience_pair(target));
                return PreferenceLabel{v.preferred, v.rationale};
            } else {
                const auto v = parsed_or_throw(parse_experience_single(target, config.cause_tags));
                return SatisfactionLabel{v.satisfaction, v.causes, v.explanation};
            }
        default:
            throw ValidationError("stage must be 1, 2 or 3");
    }
}

LabelPayload payload_from_sft_record(const Json& record, const EvaluationConfig& config) {
    detail::FieldReader r(record, "sft record");
    r.check_version();
    const auto task_id = r.string("task_id");
    const auto stage = static_cast<int>(r.integer("stage"));
    const auto item = target_from_json(r.required("item"));
    const auto target = r.string("target");
    return payload_from_target(stage, item.is_pair(), target, config.tasks.at(task_id), config);
}

SftExport export_sft(const std::vector<EvaluationSample>& samples,
                     const std::vector<HumanLabel>& final_labels, const EvaluationConfig& config,
                     const TemplateRegistry& templates, const SftOptions& options) {
    std::map<LabelKey, const HumanLabel*> finals;
    for (const auto& l : final_labels) {
        if (!finals.emplace(l.key(), &l).second) {
            throw ValidationError("two final labels for item " + to_string(l.key()));
        }
    }

    PromptBuilder builder(templates, config);
    SftExport out;
    std::size_t matched = 0;
    for (const auto& sample : samples) {
        auto keys = annotation_targets(sample);
        if (options.include_preference) {
            const auto systems = sample.system_ids();
            for (std::size_t i = 0; i < systems.size(); ++i) {
                for (std::size_t j = i + 1; j < systems.size(); ++j) {
                    keys.push_back({sample.sample_id, 3, Target::pair(systems[i], systems[j])});
                }
            }
        }
        const auto input = normalize_input(sample);
        const auto& task = config.tasks.at(sample.task_id);
        for (const auto& key : keys) {
            ++out.candidates;
            auto it = finals.find(key);
            if (it == finals.end()) {
                out.skipped.push_back({key, "no final label"});
                continue;
            }
            ++matched;
            const auto& label = *it->second;
            std::string target;
            PromptText prompt;
            try {
                target = sft_target(label.payload);
                const auto& a = sample.responses.at(key.target.system_a);
                switch (agent_of(key)) {
                    case Stage::kInteraction:
                        prompt = builder.build_interaction_prompt(task, input, a);
                        break;
                    case Stage::kSemantic:
                        prompt = builder.build_semantic_prompt(input, a, sample.responses.at(*key.target.system_b));
                        break;
                    case Stage::kExperienceSingle:
                        prompt = builder.build_experience_single_prompt(a);
                        break;
                    case Stage::kExperiencePair:
                        prompt = builder.build_experience_pair_prompt(a, sample.responses.at(*key.target.system_b));
                        break;
                }
                payload_from_target(key.stage, key.target.is_pair(), target, task, config);
            } catch (const Error& e) {
                out.skipped.push_back({key, e.what()});
                continue;
            }
            out.records.push_back({{"format_version", kFormatVersion},
                                   {"sample_id", sample.sample_id},
                                   {"task_id", sample.task_id},
                                   {"stage", key.stage},
                                   {"agent", to_string(agent_of(key))},
                                   {"item", to_json(key.target)},
                                   {"prompt", prompt.body},
                                   {"target", target}});
        }
    }
    out.unmatched_labels = finals.size() - matched;
    return out;
}

}  // namespace agenteval
