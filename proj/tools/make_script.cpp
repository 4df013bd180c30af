// Writes a scripted-backend fixture covering every call a run spec makes over
// a dataset. Outputs are synthesized from the prompt hash, so the same inputs
// always give the same script. Some outputs are wrapped in code fences or
// prose to exercise the repair path.

#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "agenteval/backend.hpp"
#include "agenteval/errors.hpp"
#include "agenteval/orchestrator.hpp"
#include "agenteval/parsers.hpp"

using namespace agenteval;

namespace {

std::mt19937_64 rng_for(const std::string& hash) {
    return std::mt19937_64(std::stoull(hash.substr(0, 16), nullptr, 16));
}

std::uint64_t pick(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

ScqsLabel level_for(double mean) {
    if (mean >= 85.0) return ScqsLabel::from_level(3);
    if (mean >= 70.0) return ScqsLabel::from_level(2);
    if (mean >= 55.0) return ScqsLabel::from_level(1);
    return ScqsLabel::from_level(0);
}

const char* kPositiveCauses[] = {"accurate_content", "complete_content", "natural_language", "clear_information",
                                 "focused"};
const char* kNegativeCauses[] = {"inaccurate_content", "incomplete_content", "unnatural_language",
                                 "unclear_information", "lacks_focus", "verbose"};
const char* kErrorTags[] = {"information_omission", "factual_error", "semantic_drift", "redundancy",
                            "verbose_elaboration"};

Json synthesize(const PlannedCall& call, const EvaluationConfig& config, const EvaluationSample& sample,
                std::mt19937_64& rng) {
    switch (call.agent) {
        case Stage::kInteraction: {
            const auto& task = config.tasks.at(sample.task_id);
            std::vector<double> scores;
            double sum = 0.0;
            for (std::size_t i = 0; i < task.k(); ++i) {
                scores.push_back(45.0 + 0.5 * static_cast<double>(pick(rng, 111)));
                sum += scores.back();
            }
            const auto mean = sum / static_cast<double>(scores.size());
            return interaction_output(scores, level_for(mean),
                                      "Scored each dimension against the request; overall " +
                                          std::string(level_for(mean).name()) + ".");
        }
        case Stage::kSemantic: {
            const int consistency = static_cast<int>(pick(rng, 2));
            const auto superior = static_cast<Superior>(pick(rng, 3));
            std::set<std::string> errors;
            if (superior != Superior::kEquivalent || consistency == 0) errors.insert(kErrorTags[pick(rng, 5)]);
            return semantic_output(consistency, superior, errors,
                                   consistency ? "Both responses agree on the key facts."
                                               : "The responses disagree on what the user asked for.");
        }
        case Stage::kExperienceSingle: {
            const auto s = kAllSatisfactions[pick(rng, 4)];
            std::set<std::string> causes;
            if (requires_causes(s)) {
                causes.insert(kNegativeCauses[pick(rng, 6)]);
            } else if (pick(rng, 2) == 0) {
                causes.insert(kPositiveCauses[pick(rng, 5)]);
            }
            return experience_single_output(s, causes, "Judged as the user would feel reading it.");
        }
        case Stage::kExperiencePair: {
            const auto p = static_cast<Preference>(pick(rng, 3));
            return experience_pair_output(p, p == Preference::kTie ? "Equally natural and focused."
                                                                   : "More natural and better focused.");
        }
    }
    throw ValidationError("unknown agent");
}

std::string dress(const Json& output, std::mt19937_64& rng) {
    switch (pick(rng, 6)) {
        case 0: return "```json\n" + output.dump(2) + "\n```";
        case 1: return "Here is my assessment:\n" + output.dump() + "\nLet me know if you need more detail.";
        default: return output.dump();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthesize a scripted-backend fixture for a dataset and run spec", "make_script"};
    std::string dataset, spec_path, out_path;
    app.add_option("--dataset", dataset, "Sample JSONL")->required();
    app.add_option("--spec", spec_path, "Run spec JSON")->required();
    app.add_option("--out", out_path, "Script JSONL to write")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        EvaluationConfig config;
        auto templates = TemplateRegistry::defaults();
        PromptBuilder builder(templates, config);
        auto spec = RunSpec::load(spec_path);
        auto samples = load_samples_file(dataset, ParseMode::kStrict, config.tasks).samples;

        ScriptFixtures fixtures;
        for (const auto& sample : samples) {
            for (const auto& call : plan_sample(sample, spec, builder, config)) {
                const auto hash = prompt_hash(call.prompt);
                auto rng = rng_for(hash);
                const auto output = synthesize(call, config, sample, rng);
                fixtures[hash] = dress(output, rng);
            }
        }
        std::ofstream out(out_path);
        write_script(out, fixtures);
        if (!out) throw StorageError("cannot write " + out_path);
        std::cout << fixtures.size() << " fixtures written to " << out_path << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
