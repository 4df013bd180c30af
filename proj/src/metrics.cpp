#include "agenteval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "json_fields.hpp"

namespace agenteval {

std::string_view to_string(AgreementStage stage) {
    switch (stage) {
        case AgreementStage::kInteraction: return "interaction";
        case AgreementStage::kSemantic: return "semantic";
        case AgreementStage::kExperience: return "experience";
        case AgreementStage::kPreference: return "preference";
    }
    return "?";
}

std::string_view column_label(AgreementStage stage) {
    switch (stage) {
        case AgreementStage::kInteraction: return "interaction evaluation";
        case AgreementStage::kSemantic: return "semantic verification";
        case AgreementStage::kExperience: return "experience decision";
        case AgreementStage::kPreference: return "pairwise preference";
    }
    return "?";
}

std::optional<AgreementStage> parse_agreement_stage(std::string_view text) {
    for (auto s : kAllAgreementStages) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

int tier_of(AgreementStage stage) {
    switch (stage) {
        case AgreementStage::kInteraction: return 1;
        case AgreementStage::kSemantic: return 2;
        default: return 3;
    }
}

std::int64_t rate_hundredths(std::int64_t agree, std::int64_t total) {
    if (total <= 0) throw EmptyDenominatorError("agreement rate over zero items");
    if (agree < 0 || agree > total) throw ValidationError("agree count outside 0..total");
    return (20000 * agree + total) / (2 * total);
}

std::string format_hundredths(std::int64_t hundredths) {
    const bool negative = hundredths < 0;
    const auto magnitude = negative ? -hundredths : hundredths;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%lld.%02lld", negative ? "-" : "",
                  static_cast<long long>(magnitude / 100), static_cast<long long>(magnitude % 100));
    return buf;
}

std::string format_fixed2(double value) {
    // The small bias keeps values such as 85.005, stored as 85.00499..., on
    // the half-up side.
    const double scaled = std::floor(value * 100.0 + 0.5 + 1e-7);
    return format_hundredths(static_cast<std::int64_t>(scaled));
}

const AgreementEntry* AgreementReport::find(AgreementStage stage) const {
    for (const auto& e : entries) {
        if (e.stage == stage) return &e;
    }
    return nullptr;
}

Json to_json(const AgreementReport& report) {
    Json stages = Json::array();
    for (auto stage : kAllAgreementStages) {
        if (const auto* e = report.find(stage)) {
            stages.push_back({{"stage", to_string(stage)},
                              {"agree_count", e->agree_count},
                              {"total", e->total},
                              {"rate_percent", e->rate_percent()},
                              {"model_only", e->model_only},
                              {"human_only", e->human_only}});
        } else if (std::find(report.no_data.begin(), report.no_data.end(), stage) != report.no_data.end()) {
            stages.push_back({{"stage", to_string(stage)}, {"no_data", true}});
        }
    }
    return {{"model_id", report.model_id}, {"stages", stages}};
}

namespace {

void insert_unique(LabelMap& map, LabelKey key, std::string label, const char* side) {
    auto k = to_string(key);
    if (!map.emplace(std::move(key), std::move(label)).second) {
        throw ValidationError(std::string("two ") + side + " labels for item " + k);
    }
}

}  // namespace

LabelMap model_labels(const RunRecord& run, AgreementStage stage) {
    LabelMap out;
    switch (stage) {
        case AgreementStage::kInteraction:
            for (const auto& v : run.stage1) {
                insert_unique(out, {v.sample_id, 1, Target::single(v.system_id)},
                              std::to_string(v.quality.level()), "model");
            }
            break;
        case AgreementStage::kSemantic:
            for (const auto& v : run.stage2) {
                insert_unique(out, {v.sample_id, 2, Target::pair(v.system_a, v.system_b)},
                              std::string(to_string(v.superior)), "model");
            }
            break;
        case AgreementStage::kExperience:
            for (const auto& v : run.stage3_single) {
                insert_unique(out, {v.sample_id, 3, Target::single(v.system_id)},
                              std::string(to_string(v.satisfaction)), "model");
            }
            break;
        case AgreementStage::kPreference:
            for (const auto& v : run.stage3_pair) {
                insert_unique(out, {v.sample_id, 3, Target::pair(v.system_a, v.system_b)},
                              std::string(to_string(v.preferred)), "model");
            }
            break;
    }
    return out;
}

LabelMap human_labels(const std::vector<HumanLabel>& final_labels, AgreementStage stage) {
    LabelMap out;
    const int tier = tier_of(stage);
    for (const auto& l : final_labels) {
        if (l.stage != tier) continue;
        if (stage == AgreementStage::kExperience && l.target.is_pair()) continue;
        if (stage == AgreementStage::kPreference && !l.target.is_pair()) continue;
        insert_unique(out, l.key(), primary_label(l.payload), "final human");
    }
    return out;
}

AgreementEntry agreement_rate(const LabelMap& model, const LabelMap& human, AgreementStage stage) {
    AgreementEntry e;
    e.stage = stage;
    for (const auto& [key, label] : model) {
        auto it = human.find(key);
        if (it == human.end()) {
            ++e.model_only;
            continue;
        }
        ++e.total;
        if (it->second == label) ++e.agree_count;
    }
    e.human_only = static_cast<std::int64_t>(human.size()) - e.total;
    if (e.total == 0) {
        throw EmptyDenominatorError(std::string("no ") + std::string(to_string(stage)) +
                                    " item has both a model verdict and a final human label");
    }
    e.rate_hundredths = rate_hundredths(e.agree_count, e.total);
    return e;
}

AgreementEntry agreement_rate(const RunRecord& run, const std::vector<HumanLabel>& final_labels,
                              AgreementStage stage) {
    return agreement_rate(model_labels(run, stage), human_labels(final_labels, stage), stage);
}

AgreementReport agreement_report(const RunRecord& run, const std::vector<HumanLabel>& final_labels) {
    AgreementReport report;
    report.model_id = run.model_id;
    for (auto stage : kAllAgreementStages) {
        if (!run.spec.stage_enabled(tier_of(stage))) continue;
        try {
            report.entries.push_back(agreement_rate(run, final_labels, stage));
        } catch (const EmptyDenominatorError&) {
            report.no_data.push_back(stage);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------

std::optional<double> DimensionTable::cell(FirstOrderDimension dim, const std::string& system) const {
    auto it = cells.find({dim, system});
    if (it == cells.end()) return std::nullopt;
    return it->second;
}

DimensionTable dimension_table(const std::vector<InteractionVerdict>& verdicts,
                               const std::vector<EvaluationSample>& samples) {
    std::map<std::string, const EvaluationSample*> by_id;
    DimensionTable table;
    for (const auto& s : samples) {
        by_id.emplace(s.sample_id, &s);
        ++table.totals[s.first_order_dimension];
    }
    struct Acc {
        double sum = 0.0;
        std::int64_t n = 0;
    };
    std::map<std::pair<FirstOrderDimension, std::string>, Acc> acc;
    std::set<std::string> systems;
    for (const auto& v : verdicts) {
        auto it = by_id.find(v.sample_id);
        if (it == by_id.end()) throw ValidationError("verdict for unknown sample '" + v.sample_id + "'");
        if (v.dimension_scores.scores.empty()) continue;
        auto& a = acc[{it->second->first_order_dimension, v.system_id}];
        a.sum += v.dimension_scores.mean();
        ++a.n;
        systems.insert(v.system_id);
    }
    table.systems.assign(systems.begin(), systems.end());
    for (const auto& [key, a] : acc) table.cells[key] = a.sum / static_cast<double>(a.n);
    return table;
}

SatisfactionDistribution satisfaction_distribution(const std::vector<SatisfactionVerdict>& verdicts) {
    SatisfactionDistribution out;
    for (const auto& v : verdicts) ++out[v.system_id][v.satisfaction];
    return out;
}

// ---------------------------------------------------------------------------

void LossConfig::validate() const {
    for (double w : {alpha, beta, gamma}) {
        if (!std::isfinite(w) || w < 0.0) throw ValidationError("loss weights must be finite and >= 0");
    }
}

Json to_json(const LossBreakdown& loss) {
    return {{"l_content", loss.l_content},
            {"l_consistency", loss.l_consistency},
            {"l_experience", loss.l_experience},
            {"total", loss.total},
            {"items", {{"content", loss.content_items},
                       {"consistency", loss.consistency_items},
                       {"experience", loss.experience_items}}}};
}

namespace {

double checked_mean(const std::vector<double>& values, const char* name) {
    double sum = 0.0;
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ValidationError(std::string(name) + " loss components must be finite and >= 0");
        }
        sum += v;
    }
    return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

LossBreakdown combine(double lc, double ls, double le, const LossConfig& config) {
    LossBreakdown b;
    b.l_content = lc;
    b.l_consistency = ls;
    b.l_experience = le;
    b.total = config.alpha * lc + config.beta * ls + config.gamma * le;
    return b;
}

}  // namespace

LossBreakdown composite_loss(const std::vector<LossComponents>& items, const LossConfig& config) {
    config.validate();
    if (items.empty()) throw ValidationError("composite loss over zero items");
    std::vector<double> c, s, e;
    for (const auto& item : items) {
        c.push_back(item.content);
        s.push_back(item.consistency);
        e.push_back(item.experience);
    }
    return composite_loss(c, s, e, config);
}

LossBreakdown composite_loss(const std::vector<double>& content, const std::vector<double>& consistency,
                             const std::vector<double>& experience, const LossConfig& config) {
    config.validate();
    auto b = combine(checked_mean(content, "content"), checked_mean(consistency, "consistency"),
                     checked_mean(experience, "experience"), config);
    b.content_items = static_cast<std::int64_t>(content.size());
    b.consistency_items = static_cast<std::int64_t>(consistency.size());
    b.experience_items = static_cast<std::int64_t>(experience.size());
    return b;
}

double cross_entropy(const std::map<std::string, double>& distribution, const std::string& label) {
    double sum = 0.0;
    for (const auto& [name, p] : distribution) {
        if (!std::isfinite(p) || p < 0.0) throw ValidationError("probability for '" + name + "' is invalid");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("probabilities must sum to 1");
    auto it = distribution.find(label);
    const double p = it == distribution.end() ? 0.0 : it->second;
    return -std::log(std::max(p, 1e-12));
}

PredictedDistribution predicted_distribution_from_json(const Json& doc) {
    detail::FieldReader r(doc, "prediction");
    r.check_version();
    PredictedDistribution p;
    p.key.sample_id = r.string("sample_id");
    p.key.stage = static_cast<int>(r.integer("stage"));
    if (p.key.stage < 1 || p.key.stage > 3) throw ValidationError("prediction: stage must be 1, 2 or 3");
    p.key.target = target_from_json(r.required("target"));
    const Json& dist = r.required("distribution");
    if (!dist.is_object() || dist.empty()) r.fail("distribution", "a non-empty object of probabilities");
    for (const auto& [label, prob] : dist.items()) {
        if (!prob.is_number()) r.fail("distribution", "a non-empty object of probabilities");
        p.distribution[label] = prob.get<double>();
    }
    r.leftovers(ParseMode::kStrict);
    return p;
}

LossBreakdown loss_from_predictions(const std::vector<PredictedDistribution>& predictions,
                                    const std::vector<HumanLabel>& final_labels, const LossConfig& config) {
    std::map<LabelKey, const HumanLabel*> finals;
    for (const auto& l : final_labels) finals.emplace(l.key(), &l);
    std::vector<double> content, consistency, experience;
    for (const auto& p : predictions) {
        auto it = finals.find(p.key);
        if (it == finals.end()) continue;
        if (p.key.stage == 3 && p.key.target.is_pair()) continue;
        const double ce = cross_entropy(p.distribution, primary_label(it->second->payload));
        (p.key.stage == 1 ? content : p.key.stage == 2 ? consistency : experience).push_back(ce);
    }
    return composite_loss(content, consistency, experience, config);
}

}  // namespace agenteval
