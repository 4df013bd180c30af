#include "agenteval/report.hpp"

#include <algorithm>
#include <sstream>

#include "agenteval/errors.hpp"

namespace agenteval {

namespace {

constexpr AgreementStage kTierStages[] = {
    AgreementStage::kInteraction,
    AgreementStage::kSemantic,
    AgreementStage::kExperience,
};

constexpr Stage kAgents[] = {Stage::kInteraction, Stage::kSemantic, Stage::kExperienceSingle,
                             Stage::kExperiencePair};

constexpr const char* kNoData = "no data";

std::string markdown_row(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + c + " |";
    return out + "\n";
}

std::string alignment_row(std::size_t value_columns) {
    std::string out = "|:--|";
    for (std::size_t i = 0; i < value_columns; ++i) out += ":-:|";
    return out + "\n";
}

std::size_t verdict_count(const RunCounts& c, Stage agent) {
    switch (agent) {
        case Stage::kInteraction: return c.stage1;
        case Stage::kSemantic: return c.stage2;
        case Stage::kExperienceSingle: return c.stage3_single;
        case Stage::kExperiencePair: return c.stage3_pair;
    }
    return 0;
}

bool has_rates(const std::optional<AgreementTable>& t) {
    if (!t) return false;
    return std::any_of(t->rows.begin(), t->rows.end(), [](const auto& r) { return !r.rates.empty(); });
}

std::int64_t parse_hundredths(const std::string& text) {
    // "89.60" -> 8960 without a floating-point round trip.
    auto dot = text.find('.');
    if (dot == std::string::npos || text.size() - dot != 3 || dot == 0) {
        throw ValidationError("expected a two-decimal value, got '" + text + "'");
    }
    auto digits = text.substr(0, dot) + text.substr(dot + 1);
    if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw ValidationError("expected a two-decimal value, got '" + text + "'");
    }
    return std::stoll(digits);
}

}  // namespace

std::optional<ReportFormat> parse_report_format(std::string_view text) {
    if (text == "md" || text == "markdown") return ReportFormat::kMarkdown;
    if (text == "csv") return ReportFormat::kCsv;
    return std::nullopt;
}

std::string_view file_extension(ReportFormat format) {
    return format == ReportFormat::kCsv ? "csv" : "md";
}

std::string render_agreement_table(const AgreementTable& table) {
    std::vector<std::string> header{"Model"};
    for (auto c : table.columns) header.emplace_back(column_label(c));
    std::string out = markdown_row(header) + alignment_row(table.columns.size());
    for (const auto& row : table.rows) {
        std::vector<std::string> cells{row.model};
        for (auto c : table.columns) {
            auto it = row.rates.find(c);
            cells.push_back(it == row.rates.end() ? "-" : format_hundredths(it->second) + "%");
        }
        out += markdown_row(cells);
    }
    return out;
}

std::string render_dimension_table(const DimensionTable& table) {
    std::vector<std::string> header{"First-order dimension", "Total"};
    header.insert(header.end(), table.systems.begin(), table.systems.end());
    std::string out = markdown_row(header) + alignment_row(table.systems.size() + 1);
    for (auto dim : kAllFirstOrderDimensions) {
        auto total = table.totals.find(dim);
        if (total == table.totals.end() || total->second == 0) continue;
        std::vector<std::string> cells{std::string(to_string(dim)), std::to_string(total->second)};
        for (const auto& s : table.systems) {
            auto v = table.cell(dim, s);
            cells.push_back(v ? format_fixed2(*v) : "-");
        }
        out += markdown_row(cells);
    }
    return out;
}

ReportData report_data(const RunRecord& run, const std::vector<EvaluationSample>& samples,
                       const std::vector<HumanLabel>* final_labels) {
    ReportData d;
    d.run_id = run.run_id;
    d.model_id = run.model_id;
    d.stages = run.spec.stages_enabled;
    d.counts = run.counts();
    for (const auto& f : run.failures) ++d.failures_by_agent[f.agent];
    if (d.stages.count(1)) {
        d.dimensions = dimension_table(run.stage1, samples);
    }
    if (d.stages.count(3)) d.satisfaction = satisfaction_distribution(run.stage3_single);

    if (final_labels) {
        auto report = agreement_report(run, *final_labels);
        AgreementTable tiers;
        AgreementTable::Row row{run.model_id, {}};
        for (auto stage : kTierStages) {
            if (!d.stages.count(tier_of(stage))) continue;
            tiers.columns.push_back(stage);
            if (const auto* e = report.find(stage)) row.rates[stage] = e->rate_hundredths;
        }
        tiers.rows.push_back(row);
        d.agreement = std::move(tiers);
        if (d.stages.count(3)) {
            AgreementTable pref;
            pref.columns.push_back(AgreementStage::kPreference);
            AgreementTable::Row prow{run.model_id, {}};
            if (const auto* e = report.find(AgreementStage::kPreference)) {
                prow.rates[AgreementStage::kPreference] = e->rate_hundredths;
            }
            pref.rows.push_back(prow);
            d.preference = std::move(pref);
        }
    }
    return d;
}

std::vector<CsvCell> report_cells(const ReportData& d) {
    std::vector<CsvCell> cells;
    cells.push_back({"run", "run_id", "", d.run_id});
    cells.push_back({"run", "model_id", "", d.model_id});

    auto agreement_cells = [&](const char* name, const std::optional<AgreementTable>& t) {
        if (!has_rates(t)) {
            cells.push_back({name, "", "", kNoData});
            return;
        }
        for (const auto& row : t->rows) {
            for (auto c : t->columns) {
                if (auto it = row.rates.find(c); it != row.rates.end()) {
                    cells.push_back({name, row.model, std::string(to_string(c)), format_hundredths(it->second)});
                }
            }
        }
    };
    agreement_cells("agreement", d.agreement);
    if (d.stages.count(3)) agreement_cells("preference", d.preference);

    if (d.stages.count(1)) {
        if (d.dimensions.cells.empty()) {
            cells.push_back({"dimensions", "", "", kNoData});
        } else {
            for (auto dim : kAllFirstOrderDimensions) {
                auto total = d.dimensions.totals.find(dim);
                if (total == d.dimensions.totals.end() || total->second == 0) continue;
                const std::string row(to_string(dim));
                cells.push_back({"dimensions", row, "Total", std::to_string(total->second)});
                for (const auto& s : d.dimensions.systems) {
                    if (auto v = d.dimensions.cell(dim, s)) cells.push_back({"dimensions", row, s, format_fixed2(*v)});
                }
            }
        }
    }
    if (d.stages.count(3)) {
        if (d.satisfaction.empty()) {
            cells.push_back({"satisfaction", "", "", kNoData});
        } else {
            for (const auto& [system, counts] : d.satisfaction) {
                for (auto s : kAllSatisfactions) {
                    auto it = counts.find(s);
                    cells.push_back({"satisfaction", system, std::string(to_string(s)),
                                     std::to_string(it == counts.end() ? 0 : it->second)});
                }
            }
        }
    }
    for (auto agent : kAgents) {
        if (!d.stages.count(tier_of(agent))) continue;
        const std::string row(to_string(agent));
        auto f = d.failures_by_agent.find(agent);
        cells.push_back({"counts", row, "verdicts", std::to_string(verdict_count(d.counts, agent))});
        cells.push_back({"counts", row, "failures", std::to_string(f == d.failures_by_agent.end() ? 0 : f->second)});
    }
    return cells;
}

std::string render_report(const ReportData& d, ReportFormat format) {
    if (format == ReportFormat::kCsv) return render_csv(report_cells(d));

    std::ostringstream out;
    out << "# Evaluation report\n\n";
    out << "Run: " << d.run_id << "\n";
    out << "Model: " << d.model_id << "\n";
    out << "Stages:";
    for (int s : d.stages) out << ' ' << s;
    out << "\n";

    out << "\n## Human-model agreement\n\n";
    if (has_rates(d.agreement)) {
        out << render_agreement_table(*d.agreement);
    } else {
        out << kNoData << "\n";
    }
    if (d.stages.count(3)) {
        out << "\n## Pairwise preference agreement\n\n";
        if (has_rates(d.preference)) {
            out << render_agreement_table(*d.preference);
        } else {
            out << kNoData << "\n";
        }
    }
    if (d.stages.count(1)) {
        out << "\n## Average scores by first-order dimension\n\n";
        if (d.dimensions.cells.empty()) {
            out << kNoData << "\n";
        } else {
            out << render_dimension_table(d.dimensions);
        }
    }
    if (d.stages.count(3)) {
        out << "\n## Satisfaction distribution\n\n";
        if (d.satisfaction.empty()) {
            out << kNoData << "\n";
        } else {
            std::vector<std::string> header{"System"};
            for (auto s : kAllSatisfactions) header.emplace_back(display_label(s));
            out << markdown_row(header) << alignment_row(4);
            for (const auto& [system, counts] : d.satisfaction) {
                std::vector<std::string> cells{system};
                for (auto s : kAllSatisfactions) {
                    auto it = counts.find(s);
                    cells.push_back(std::to_string(it == counts.end() ? 0 : it->second));
                }
                out << markdown_row(cells);
            }
        }
    }

    out << "\n## Verdict counts\n\n";
    out << markdown_row({"Agent", "Verdicts", "Failures"}) << alignment_row(2);
    for (auto agent : kAgents) {
        if (!d.stages.count(tier_of(agent))) continue;
        auto f = d.failures_by_agent.find(agent);
        out << markdown_row({std::string(to_string(agent)), std::to_string(verdict_count(d.counts, agent)),
                             std::to_string(f == d.failures_by_agent.end() ? 0 : f->second)});
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string render_csv(const std::vector<CsvCell>& cells) {
    std::string out = "table,row,column,value\n";
    for (const auto& c : cells) {
        out += csv_field(c.table) + "," + csv_field(c.row) + "," + csv_field(c.column) + "," +
               csv_field(c.value) + "\n";
    }
    return out;
}

std::vector<CsvCell> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            record.push_back(std::move(field));
            records.push_back(std::move(record));
            record.clear();
            field.clear();
            field_started = false;
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw ValidationError("csv: unterminated quoted field");
    if (field_started || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    if (records.empty() || records.front() != std::vector<std::string>{"table", "row", "column", "value"}) {
        throw ValidationError("csv: expected header table,row,column,value");
    }
    std::vector<CsvCell> cells;
    for (std::size_t i = 1; i < records.size(); ++i) {
        auto& r = records[i];
        if (r.size() != 4) {
            throw ValidationError("csv: line " + std::to_string(i + 1) + " has " + std::to_string(r.size()) +
                                  " fields, expected 4");
        }
        cells.push_back({std::move(r[0]), std::move(r[1]), std::move(r[2]), std::move(r[3])});
    }
    return cells;
}

AgreementTable agreement_table_from_cells(const std::vector<CsvCell>& cells, std::string_view table) {
    AgreementTable t;
    for (const auto& c : cells) {
        if (c.table != table || c.value == kNoData) continue;
        auto stage = parse_agreement_stage(c.column);
        if (!stage) throw ValidationError("csv: unknown agreement column '" + c.column + "'");
        if (std::find(t.columns.begin(), t.columns.end(), *stage) == t.columns.end()) t.columns.push_back(*stage);
        auto row = std::find_if(t.rows.begin(), t.rows.end(), [&](const auto& r) { return r.model == c.row; });
        if (row == t.rows.end()) row = t.rows.insert(t.rows.end(), {c.row, {}});
        row->rates[*stage] = parse_hundredths(c.value);
    }
    return t;
}

DimensionTable dimension_table_from_cells(const std::vector<CsvCell>& cells) {
    DimensionTable t;
    for (const auto& c : cells) {
        if (c.table != "dimensions" || c.value == kNoData) continue;
        auto dim = parse_first_order_dimension(c.row);
        if (!dim) throw ValidationError("csv: unknown first-order dimension '" + c.row + "'");
        if (c.column == "Total") {
            t.totals[*dim] = std::stoll(c.value);
            continue;
        }
        if (std::find(t.systems.begin(), t.systems.end(), c.column) == t.systems.end()) {
            t.systems.push_back(c.column);
        }
        t.cells[{*dim, c.column}] = static_cast<double>(parse_hundredths(c.value)) / 100.0;
    }
    return t;
}

}  // namespace agenteval
