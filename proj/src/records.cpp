#include "agenteval/records.hpp"

#include "json_fields.hpp"

namespace agenteval {

using detail::FieldReader;
using detail::merge_extra;
using detail::strings_to_json;

std::string to_line(const Json& record) {
    return record.dump(-1, ' ', false, Json::error_handler_t::replace);
}

Json to_json(const Target& target) {
    if (target.system_b) return Json::array({target.system_a, *target.system_b});
    return target.system_a;
}

Target target_from_json(const Json& value) {
    if (value.is_string() && !value.get<std::string>().empty()) {
        return Target::single(value.get<std::string>());
    }
    if (value.is_array() && value.size() == 2 && value[0].is_string() && value[1].is_string()) {
        auto a = value[0].get<std::string>();
        auto b = value[1].get<std::string>();
        if (a.empty() || b.empty() || a == b) {
            throw ValidationError("target pair needs two distinct non-empty system ids");
        }
        return Target::pair(std::move(a), std::move(b));
    }
    throw ValidationError("target must be a system id or a [system_a, system_b] pair");
}

Json to_json(const ModalSegment& segment) {
    return {
        {"kind", to_string(segment.kind)},
        {"text", segment.text},
        {"labels", segment.labels},
        {"salient_regions", segment.salient_regions},
        {"order_index", segment.order_index},
    };
}

ModalSegment segment_from_json(const Json& doc, ParseMode mode) {
    FieldReader r(doc, "input segment");
    ModalSegment segment;
    auto kind = r.string("kind");
    auto parsed = parse_segment_kind(kind);
    if (!parsed) throw ValidationError("input segment: unknown kind '" + kind + "'");
    segment.kind = *parsed;
    segment.text = r.string_or("text", "");
    segment.labels = r.strings("labels", false);
    segment.salient_regions = r.strings("salient_regions", false);
    auto index = r.integer("order_index");
    if (index < 0) throw ValidationError("input segment: order_index must be non-negative");
    segment.order_index = static_cast<std::size_t>(index);
    // Segments have no extension slot; unknown fields are dropped in lenient mode.
    r.leftovers(mode);
    return segment;
}

Json to_json(const EvaluationSample& sample) {
    Json segments = Json::array();
    for (const auto& s : sample.input_segments) segments.push_back(to_json(s));
    Json record = {
        {"format_version", kFormatVersion},
        {"sample_id", sample.sample_id},
        {"task_id", sample.task_id},
        {"first_order_dimension", to_string(sample.first_order_dimension)},
        {"input_segments", std::move(segments)},
        {"responses", sample.responses},
    };
    merge_extra(record, sample.extra);
    return record;
}

EvaluationSample sample_from_json(const Json& doc, ParseMode mode) {
    FieldReader r(doc, "sample");
    r.check_version();
    EvaluationSample sample;
    sample.sample_id = r.string("sample_id");
    sample.task_id = r.string("task_id");
    auto dim_name = r.string("first_order_dimension");
    auto dim = parse_first_order_dimension(dim_name);
    if (!dim) throw ValidationError("sample: unknown first_order_dimension '" + dim_name + "'");
    sample.first_order_dimension = *dim;

    const Json& segments = r.required("input_segments");
    if (!segments.is_array()) r.fail("input_segments", "an array");
    for (const auto& s : segments) sample.input_segments.push_back(segment_from_json(s, mode));

    const Json& responses = r.required("responses");
    if (!responses.is_object()) r.fail("responses", "an object of system_id -> text");
    for (auto it = responses.begin(); it != responses.end(); ++it) {
        if (!it.value().is_string()) r.fail("responses", "an object of system_id -> text");
        sample.responses.emplace(it.key(), it.value().get<std::string>());
    }
    sample.extra = r.leftovers(mode);
    return sample;
}

Json to_json(const InteractionVerdict& verdict) {
    Json record = {
        {"format_version", kFormatVersion},
        {"sample_id", verdict.sample_id},
        {"system_id", verdict.system_id},
        {"dimension_scores",
         {{"task_id", verdict.dimension_scores.task_id},
          {"scores", verdict.dimension_scores.scores}}},
        {"quality", {{"level", verdict.quality.level()}, {"name", verdict.quality.name()}}},
        {"rationale", verdict.rationale},
    };
    merge_extra(record, verdict.extra);
    return record;
}

InteractionVerdict interaction_verdict_from_json(const Json& doc, ParseMode mode) {
    FieldReader r(doc, "interaction verdict");
    r.check_version();
    InteractionVerdict v;
    v.sample_id = r.string("sample_id");
    v.system_id = r.string("system_id");

    FieldReader scores(r.required("dimension_scores"), "dimension_scores");
    v.dimension_scores.task_id = scores.string("task_id");
    const Json& list = scores.required("scores");
    if (!list.is_array()) scores.fail("scores", "an array of numbers");
    for (const auto& s : list) {
        if (!s.is_number()) scores.fail("scores", "an array of numbers");
        v.dimension_scores.scores.push_back(s.get<double>());
    }
    scores.leftovers(ParseMode::kStrict);

    FieldReader quality(r.required("quality"), "quality");
    auto level = quality.integer("level");
    if (level < 0 || level >= kScqsLevelCount) {
        throw ValidationError("quality: level out of range");
    }
    v.quality = ScqsLabel::from_level(static_cast<int>(level));
    if (quality.has("name") && quality.string("name") != v.quality.name()) {
        throw ValidationError("quality: name does not match level");
    }
    quality.leftovers(ParseMode::kStrict);

    v.rationale = r.string_or("rationale", "");
    v.extra = r.leftovers(mode);
    return v;
}

Json to_json(const ComparisonVerdict& verdict) {
    Json record = {
        {"format_version", kFormatVersion},
        {"sample_id", verdict.sample_id},
        {"system_a", verdict.system_a},
        {"system_b", verdict.system_b},
        {"consistency", verdict.consistency},
        {"superior", to_string(verdict.superior)},
        {"error_attributions", strings_to_json(verdict.error_attributions)},
        {"rationale", verdict.rationale},
    };
    merge_extra(record, verdict.extra);
    return record;
}

ComparisonVerdict comparison_verdict_from_json(const Json& doc, ParseMode mode) {
    FieldReader r(doc, "comparison verdict");
    r.check_version();
    ComparisonVerdict v;
    v.sample_id = r.string("sample_id");
    v.system_a = r.string("system_a");
    v.system_b = r.string("system_b");
    auto y = r.integer("consistency");
    if (y != 0 && y != 1) throw ValidationError("comparison verdict: consistency must be 0 or 1");
    v.consistency = static_cast<int>(y);
    auto z = r.string("superior");
    auto parsed = parse_superior(z);
    if (!parsed) throw ValidationError("comparison verdict: unknown superior '" + z + "'");
    v.superior = *parsed;
    v.error_attributions = r.string_set("error_attributions");
    v.rationale = r.string_or("rationale", "");
    v.extra = r.leftovers(mode);
    return v;
}

Json to_json(const SatisfactionVerdict& verdict) {
    Json record = {
        {"format_version", kFormatVersion},
        {"sample_id", verdict.sample_id},
        {"system_id", verdict.system_id},
        {"satisfaction", to_string(verdict.satisfaction)},
        {"causes", strings_to_json(verdict.causes)},
        {"explanation", verdict.explanation},
    };
    merge_extra(record, verdict.extra);
    return record;
}

SatisfactionVerdict satisfaction_verdict_from_json(const Json& doc, ParseMode mode) {
    FieldReader r(doc, "satisfaction verdict");
    r.check_version();
    SatisfactionVerdict v;
    v.sample_id = r.string("sample_id");
    v.system_id = r.string("system_id");
    auto label = r.string("satisfaction");
    auto parsed = parse_satisfaction(label);
    if (!parsed) throw ValidationError("satisfaction verdict: unknown label '" + label + "'");
    v.satisfaction = *parsed;
    v.causes = r.string_set("causes");
    v.explanation = r.string_or("explanation", "");
    v.extra = r.leftovers(mode);
    return v;
}

Json to_json(const PreferenceVerdict& verdict) {
    Json record = {
        {"format_version", kFormatVersion},
        {"sample_id", verdict.sample_id},
        {"system_a", verdict.system_a},
        {"system_b", verdict.system_b},
        {"preferred", to_string(verdict.preferred)},
        {"rationale", verdict.rationale},
    };
    merge_extra(record, verdict.extra);
    return record;
}

PreferenceVerdict preference_verdict_from_json(const Json& doc, ParseMode mode) {
    FieldReader r(doc, "preference verdict");
    r.check_version();
    PreferenceVerdict v;
    v.sample_id = r.string("sample_id");
    v.system_a = r.string("system_a");
    v.system_b = r.string("system_b");
    auto p = r.string("preferred");
    auto parsed = parse_preference(p);
    if (!parsed) throw ValidationError("preference verdict: unknown preferred '" + p + "'");
    v.preferred = *parsed;
    v.rationale = r.string_or("rationale", "");
    v.extra = r.leftovers(mode);
    return v;
}

}  // namespace agenteval
