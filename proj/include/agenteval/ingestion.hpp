#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

#include "agenteval/core.hpp"
#include "agenteval/records.hpp"

namespace agenteval {

// The structured text paragraph every agent tier receives as its view of x.
struct NormalizedInput {
    std::string sample_id;
    std::string paragraph;
    std::size_t segment_count = 0;

    bool operator==(const NormalizedInput&) const = default;
};

struct SkippedRecord {
    std::size_t line_number = 0;  // 1-based
    std::string reason;
};

struct LoadResult {
    std::vector<EvaluationSample> samples;
    std::vector<SkippedRecord> skipped;
};

// Reads JSONL samples. Blank lines are ignored. In strict mode the first
// invalid record throws ValidationError whose message starts with
// "line <n>:"; in lenient mode invalid records are skipped and reported.
// Unknown record fields follow the same mode (rejected / preserved).
LoadResult load_samples(std::istream& source, ParseMode mode, const TaskRegistry& tasks);
LoadResult load_samples_file(const std::string& path, ParseMode mode, const TaskRegistry& tasks);

// Writes samples as canonical JSONL.
void write_samples(std::ostream& out, const std::vector<EvaluationSample>& samples);

// Renders the input segments (never the responses) as delimited blocks in
// order_index order:
//
//   <<<segment 1/2 dialogue_turn>>>
//   What's the weather
//   <<<end segment 1>>>
//
// Voice blocks prefix the transcript with "[voice] "; image blocks emit
// "[image] caption: ", "[image] labels: " and one "[image] region: " line per
// salient region.
NormalizedInput normalize_input(const EvaluationSample& sample);

}  // namespace agenteval
