#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agenteval/metrics.hpp"

namespace agenteval {

enum class ReportFormat { kMarkdown, kCsv };

// "md", "markdown" or "csv".
std::optional<ReportFormat> parse_report_format(std::string_view text);
std::string_view file_extension(ReportFormat format);

// Model rows by agreement-stage columns, rates in hundredths of a percent.
struct AgreementTable {
    std::vector<AgreementStage> columns;
    struct Row {
        std::string model;
        std::map<AgreementStage, std::int64_t> rates;  // absent cell: no data
        bool operator==(const Row&) const = default;
    };
    std::vector<Row> rows;

    bool operator==(const AgreementTable&) const = default;
};

// Markdown tables. Column alignment is left for the row label and centred
// for values. Absent cells render as "-".
std::string render_agreement_table(const AgreementTable& table);
std::string render_dimension_table(const DimensionTable& table);

struct ReportData {
    std::string run_id;
    std::string model_id;
    std::set<int> stages{1, 2, 3};
    // Absent: no human labels were supplied.
    std::optional<AgreementTable> agreement;
    std::optional<AgreementTable> preference;
    DimensionTable dimensions;
    SatisfactionDistribution satisfaction;
    RunCounts counts;
    std::map<Stage, std::int64_t> failures_by_agent;
};

// `final_labels` may be null when no ledger is available.
ReportData report_data(const RunRecord& run, const std::vector<EvaluationSample>& samples,
                       const std::vector<HumanLabel>* final_labels);

// Sections for disabled stages are omitted; enabled sections without data say
// "no data". Deterministic: timestamps are not rendered.
std::string render_report(const ReportData& data, ReportFormat format);

// Long-format CSV, header "table,row,column,value".
struct CsvCell {
    std::string table;
    std::string row;
    std::string column;
    std::string value;
    bool operator==(const CsvCell&) const = default;
};

std::vector<CsvCell> report_cells(const ReportData& data);
std::string render_csv(const std::vector<CsvCell>& cells);
// Throws ValidationError on malformed CSV.
std::vector<CsvCell> parse_csv(std::string_view text);

// Rebuild tables from parsed cells (the CSV parse-back path).
AgreementTable agreement_table_from_cells(const std::vector<CsvCell>& cells, std::string_view table);
DimensionTable dimension_table_from_cells(const std::vector<CsvCell>& cells);

}  // namespace agenteval
