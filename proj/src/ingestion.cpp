#include "agenteval/ingestion.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "agenteval/errors.hpp"

namespace agenteval {

namespace {

bool is_blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

LoadResult load_samples(std::istream& source, ParseMode mode, const TaskRegistry& tasks) {
    LoadResult result;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(source, line)) {
        ++line_number;
        if (is_blank(line)) continue;
        try {
            Json doc = Json::parse(line, nullptr, false);
            if (doc.is_discarded()) throw ValidationError("malformed JSON");
            auto sample = sample_from_json(doc, mode);
            validate_sample(sample, tasks);
            if (!seen.insert(sample.sample_id).second) {
                throw ValidationError("duplicate sample_id '" + sample.sample_id + "'");
            }
            result.samples.push_back(std::move(sample));
        } catch (const Error& e) {
            std::string reason = e.what();
            if (mode == ParseMode::kStrict) {
                throw ValidationError("line " + std::to_string(line_number) + ": " + reason);
            }
            result.skipped.push_back({line_number, std::move(reason)});
        }
    }
    return result;
}

LoadResult load_samples_file(const std::string& path, ParseMode mode, const TaskRegistry& tasks) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open dataset '" + path + "'");
    return load_samples(in, mode, tasks);
}

void write_samples(std::ostream& out, const std::vector<EvaluationSample>& samples) {
    for (const auto& s : samples) out << to_line(to_json(s)) << '\n';
}

NormalizedInput normalize_input(const EvaluationSample& sample) {
    std::vector<const ModalSegment*> ordered;
    ordered.reserve(sample.input_segments.size());
    for (const auto& s : sample.input_segments) ordered.push_back(&s);
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        return a->order_index < b->order_index;
    });

    const std::string total = std::to_string(ordered.size());
    std::string paragraph;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        const ModalSegment& seg = *ordered[i];
        const std::string n = std::to_string(i + 1);
        paragraph += "<<<segment " + n + "/" + total + " " + std::string(to_string(seg.kind)) +
                     ">>>\n";
        switch (seg.kind) {
            case SegmentKind::kDialogueTurn:
                paragraph += seg.text + "\n";
                break;
            case SegmentKind::kVoiceTranscript:
                paragraph += "[voice] " + seg.text + "\n";
                break;
            case SegmentKind::kImageDescriptor:
                if (!seg.text.empty()) paragraph += "[image] caption: " + seg.text + "\n";
                if (!seg.labels.empty()) paragraph += "[image] labels: " + join(seg.labels, ", ") + "\n";
                for (const auto& region : seg.salient_regions) {
                    paragraph += "[image] region: " + region + "\n";
                }
                break;
        }
        paragraph += "<<<end segment " + n + ">>>\n";
    }
    return {sample.sample_id, std::move(paragraph), ordered.size()};
}

}  // namespace agenteval
