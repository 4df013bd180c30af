#include "agenteval/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <spdlog/spdlog.h>

#include "agenteval/errors.hpp"
#include "agenteval/parsers.hpp"
#include "json_fields.hpp"

namespace agenteval {

namespace {

constexpr const char* kReaskNotice =
    "Your previous reply could not be parsed. Reply again with only the JSON object described "
    "above and no other text.";

fs::path resolve_ref(const std::string& ref, const fs::path& base_dir) {
    fs::path p(ref);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p;
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

// ---------------------------------------------------------------------------
// RunSpec

void RunSpec::validate() const {
    check_identifier(run_id, "run id");
    if (dataset_ref.empty()) throw ValidationError("run spec: dataset_ref must not be empty");
    if (stages_enabled.empty()) throw ValidationError("run spec: stages_enabled must not be empty");
    for (int s : stages_enabled) {
        if (s < 1 || s > 3) throw ValidationError("run spec: stages must be 1, 2 or 3");
    }
    if (parallelism < 1 || parallelism > 256) {
        throw ValidationError("run spec: parallelism must be within 1..256");
    }
    if (reask_limit < 0 || reask_limit > 5) throw ValidationError("run spec: reask_limit must be within 0..5");
    if (!all_pairs) {
        std::set<SystemPair> seen;
        for (const auto& [a, b] : system_pairs) {
            if (a.empty() || b.empty()) throw ValidationError("run spec: empty system id in pair");
            if (a == b) throw ValidationError("run spec: pair (" + a + ", " + b + ") repeats a system");
            if (!seen.insert({a, b}).second) {
                throw ValidationError("run spec: pair (" + a + ", " + b + ") listed twice");
            }
        }
    }
}

RunSpec RunSpec::from_json(const Json& doc, const fs::path& base_dir) {
    detail::FieldReader r(doc, "run spec");
    r.check_version();
    RunSpec spec;
    spec.run_id = r.string("run_id");
    spec.dataset_ref = r.string("dataset_ref");
    spec.model_config_ref = r.string_or("model_config_ref", "");

    if (!base_dir.empty()) {
        if (auto p = resolve_ref(spec.dataset_ref, base_dir); fs::exists(p)) spec.dataset_ref = p.string();
        if (!spec.model_config_ref.empty()) {
            spec.model_config_ref = resolve_ref(spec.model_config_ref, base_dir).string();
        }
    }

    if (const Json* pairs = r.optional("system_pairs"); pairs && !pairs->is_null()) {
        if (pairs->is_string()) {
            if (pairs->get<std::string>() != "all_pairs") r.fail("system_pairs", "\"all_pairs\" or a list of pairs");
        } else if (pairs->is_array()) {
            spec.all_pairs = false;
            for (const auto& p : *pairs) {
                if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
                    r.fail("system_pairs", "\"all_pairs\" or a list of [system_a, system_b]");
                }
                spec.system_pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
            }
        } else {
            r.fail("system_pairs", "\"all_pairs\" or a list of pairs");
        }
    }
    if (const Json* stages = r.optional("stages_enabled")) {
        if (!stages->is_array()) r.fail("stages_enabled", "an array of stage numbers");
        spec.stages_enabled.clear();
        for (const auto& s : *stages) {
            if (!s.is_number_integer()) r.fail("stages_enabled", "an array of stage numbers");
            spec.stages_enabled.insert(s.get<int>());
        }
    }
    if (const Json* v = r.optional("swap_pairs")) {
        if (!v->is_boolean()) r.fail("swap_pairs", "a boolean");
        spec.swap_pairs = v->get<bool>();
    }
    if (const Json* v = r.optional("parallelism")) {
        if (!v->is_number_integer()) r.fail("parallelism", "an integer");
        spec.parallelism = v->get<int>();
    }
    if (const Json* v = r.optional("reask_limit")) {
        if (!v->is_number_integer()) r.fail("reask_limit", "an integer");
        spec.reask_limit = v->get<int>();
    }
    r.leftovers(ParseMode::kStrict);
    spec.validate();
    return spec;
}

RunSpec RunSpec::load(const fs::path& path) {
    Json doc = Json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded()) throw ValidationError("run spec '" + path.string() + "' is not JSON");
    return from_json(doc, path.parent_path());
}

Json to_json(const RunSpec& spec) {
    Json pairs;
    if (spec.all_pairs) {
        pairs = "all_pairs";
    } else {
        pairs = Json::array();
        for (const auto& [a, b] : spec.system_pairs) pairs.push_back({a, b});
    }
    return {{"format_version", kFormatVersion},
            {"run_id", spec.run_id},
            {"dataset_ref", spec.dataset_ref},
            {"model_config_ref", spec.model_config_ref},
            {"system_pairs", pairs},
            {"stages_enabled", spec.stages_enabled},
            {"swap_pairs", spec.swap_pairs},
            {"parallelism", spec.parallelism},
            {"reask_limit", spec.reask_limit}};
}

// ---------------------------------------------------------------------------
// Pairing and planning

PairingResult pair_responses(const EvaluationSample& sample, const RunSpec& spec) {
    PairingResult result;
    auto add = [&](const std::string& a, const std::string& b) {
        result.pairs.emplace_back(a, b);
        if (spec.swap_pairs) result.pairs.emplace_back(b, a);
    };
    if (spec.all_pairs) {
        const auto systems = sample.system_ids();
        for (std::size_t i = 0; i < systems.size(); ++i) {
            for (std::size_t j = i + 1; j < systems.size(); ++j) add(systems[i], systems[j]);
        }
        return result;
    }
    for (const auto& [a, b] : spec.system_pairs) {
        std::vector<std::string> missing;
        if (!sample.has_system(a)) missing.push_back(a);
        if (!sample.has_system(b)) missing.push_back(b);
        if (!missing.empty()) {
            result.errors.push_back("pair (" + a + ", " + b + "): sample '" + sample.sample_id +
                                    "' has no response from " + join(missing, ", "));
            continue;
        }
        add(a, b);
    }
    return result;
}

std::vector<PlannedCall> plan_sample(const EvaluationSample& sample, const RunSpec& spec,
                                     const PromptBuilder& builder, const EvaluationConfig& config,
                                     std::vector<FailureEntry>* failures) {
    std::vector<PlannedCall> calls;
    const auto input = normalize_input(sample);
    const auto systems = sample.system_ids();

    auto guarded = [&](int stage, Stage agent, const Target& target, auto&& build) {
        try {
            calls.push_back({sample.sample_id, agent, target, build()});
        } catch (const Error& e) {
            if (!failures) throw;
            failures->push_back({sample.sample_id, stage, agent, target, "validation", e.what()});
        }
    };

    if (spec.stage_enabled(1)) {
        const auto& task = config.tasks.at(sample.task_id);
        for (const auto& s : systems) {
            guarded(1, Stage::kInteraction, Target::single(s), [&] {
                return builder.build_interaction_prompt(task, input, sample.responses.at(s));
            });
        }
    }

    PairingResult pairing;
    if (spec.stage_enabled(2) || spec.stage_enabled(3)) {
        pairing = pair_responses(sample, spec);
        if (failures) {
            for (int stage : {2, 3}) {
                if (!spec.stage_enabled(stage)) continue;
                for (const auto& error : pairing.errors) {
                    failures->push_back({sample.sample_id, stage,
                                         stage == 2 ? Stage::kSemantic : Stage::kExperiencePair,
                                         std::nullopt, "missing_system", error});
                }
            }
        }
    }

    if (spec.stage_enabled(2)) {
        for (const auto& [a, b] : pairing.pairs) {
            guarded(2, Stage::kSemantic, Target::pair(a, b), [&] {
                return builder.build_semantic_prompt(input, sample.responses.at(a), sample.responses.at(b));
            });
        }
    }

    if (spec.stage_enabled(3)) {
        for (const auto& s : systems) {
            guarded(3, Stage::kExperienceSingle, Target::single(s), [&] {
                return builder.build_experience_single_prompt(sample.responses.at(s));
            });
        }
        for (const auto& [a, b] : pairing.pairs) {
            guarded(3, Stage::kExperiencePair, Target::pair(a, b), [&] {
                return builder.build_experience_pair_prompt(sample.responses.at(a), sample.responses.at(b));
            });
        }
    }
    return calls;
}

PromptText reask_prompt(const PromptText& prompt, int n) {
    PromptText out = prompt;
    for (int i = 0; i < n; ++i) out.body += std::string("\n\n") + kReaskNotice;
    return out;
}

// ---------------------------------------------------------------------------
// Failure records

Json to_json(const FailureEntry& failure) {
    return {{"format_version", kFormatVersion},
            {"sample_id", failure.sample_id},
            {"stage", failure.stage},
            {"agent", to_string(failure.agent)},
            {"target", failure.target ? to_json(*failure.target) : Json(nullptr)},
            {"error_kind", failure.error_kind},
            {"message", failure.message}};
}

FailureEntry failure_from_json(const Json& doc) {
    detail::FieldReader r(doc, "failure record");
    r.check_version();
    FailureEntry f;
    f.sample_id = r.string("sample_id");
    f.stage = static_cast<int>(r.integer("stage"));
    auto agent = r.string("agent");
    auto parsed = parse_stage(agent);
    if (!parsed) throw ValidationError("failure record: unknown agent '" + agent + "'");
    f.agent = *parsed;
    if (const Json* t = r.optional("target"); t && !t->is_null()) f.target = target_from_json(*t);
    f.error_kind = r.string("error_kind");
    f.message = r.string("message");
    r.leftovers(ParseMode::kStrict);
    return f;
}

namespace {

CompletionRecord completion_from_json(const Json& doc) {
    detail::FieldReader r(doc, "completion record");
    CompletionRecord c;
    c.prompt_hash = r.string("prompt_hash");
    c.raw_output = r.string("raw_output");
    c.latency_ms = r.number("latency_ms");
    c.attempt_count = static_cast<int>(r.integer("attempt_count"));
    c.model_id = r.string("model_id");
    r.leftovers(ParseMode::kLenient);
    return c;
}

auto completion_key(const CompletionRecord& c) {
    return std::tie(c.prompt_hash, c.raw_output, c.attempt_count, c.model_id);
}

}  // namespace

// ---------------------------------------------------------------------------
// RunRecord

RunCounts RunRecord::counts() const {
    return {stage1.size(),   stage2.size(),   stage3_single.size(),
            stage3_pair.size(), failures.size(), completions.size()};
}

void RunRecord::canonicalize() {
    std::sort(stage1.begin(), stage1.end(), [](const auto& x, const auto& y) {
        return std::tie(x.sample_id, x.system_id) < std::tie(y.sample_id, y.system_id);
    });
    auto by_pair = [](const auto& x, const auto& y) {
        return std::tie(x.sample_id, x.system_a, x.system_b) < std::tie(y.sample_id, y.system_a, y.system_b);
    };
    std::sort(stage2.begin(), stage2.end(), by_pair);
    std::sort(stage3_pair.begin(), stage3_pair.end(), by_pair);
    std::sort(stage3_single.begin(), stage3_single.end(), [](const auto& x, const auto& y) {
        return std::tie(x.sample_id, x.system_id) < std::tie(y.sample_id, y.system_id);
    });
    std::sort(failures.begin(), failures.end(), [](const FailureEntry& x, const FailureEntry& y) {
        return std::tie(x.sample_id, x.stage, x.agent, x.target, x.error_kind, x.message) <
               std::tie(y.sample_id, y.stage, y.agent, y.target, y.error_kind, y.message);
    });
    std::sort(completions.begin(), completions.end(),
              [](const auto& x, const auto& y) { return completion_key(x) < completion_key(y); });
}

RunRecord normalized(RunRecord record) {
    record.run_id.clear();
    record.spec.run_id.clear();
    record.started_at.clear();
    record.finished_at.clear();
    for (auto& c : record.completions) c.latency_ms = 0.0;
    record.canonicalize();
    return record;
}

bool same_results(const RunRecord& a, const RunRecord& b) {
    auto x = normalized(a);
    auto y = normalized(b);
    auto completions_equal = [](const auto& p, const auto& q) {
        return p.size() == q.size() &&
               std::equal(p.begin(), p.end(), q.begin(), [](const auto& l, const auto& r) {
                   return completion_key(l) == completion_key(r) && l.latency_ms == r.latency_ms;
               });
    };
    return x.model_id == y.model_id && to_json(x.spec) == to_json(y.spec) && x.stage1 == y.stage1 &&
           x.stage2 == y.stage2 && x.stage3_single == y.stage3_single &&
           x.stage3_pair == y.stage3_pair && x.failures == y.failures &&
           completions_equal(x.completions, y.completions) && x.completions_ref == y.completions_ref;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto millis =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(millis));
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

struct SampleResult {
    std::vector<InteractionVerdict> stage1;
    std::vector<ComparisonVerdict> stage2;
    std::vector<SatisfactionVerdict> stage3_single;
    std::vector<PreferenceVerdict> stage3_pair;
    std::vector<FailureEntry> failures;
    std::vector<CompletionRecord> completions;
};

// Single writer: workers hand over whole sample results.
class RunSink {
public:
    RunSink(RunRecord& record, const fs::path& dir) : record_(record) {
        if (dir.empty()) return;
        stage1_ = std::make_unique<JsonlAppender>(dir / "verdicts_stage1.jsonl");
        stage2_ = std::make_unique<JsonlAppender>(dir / "verdicts_stage2.jsonl");
        stage3_ = std::make_unique<JsonlAppender>(dir / "verdicts_stage3.jsonl");
        failures_ = std::make_unique<JsonlAppender>(dir / "failures.jsonl");
        completions_ = std::make_unique<JsonlAppender>(dir / "completions.jsonl");
    }

    void accept(SampleResult&& r) {
        std::lock_guard lock(mutex_);
        if (stage1_) {
            for (const auto& v : r.stage1) stage1_->append(to_json(v));
            for (const auto& v : r.stage2) stage2_->append(to_json(v));
            for (const auto& v : r.stage3_single) stage3_->append(to_json(v));
            for (const auto& v : r.stage3_pair) stage3_->append(to_json(v));
            for (const auto& f : r.failures) failures_->append(to_json(f));
            for (const auto& c : r.completions) completions_->append(to_json(c));
        }
        move_into(record_.stage1, r.stage1);
        move_into(record_.stage2, r.stage2);
        move_into(record_.stage3_single, r.stage3_single);
        move_into(record_.stage3_pair, r.stage3_pair);
        move_into(record_.failures, r.failures);
        move_into(record_.completions, r.completions);
    }

private:
    template <typename T>
    static void move_into(std::vector<T>& dst, std::vector<T>& src) {
        dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
    }

    RunRecord& record_;
    std::mutex mutex_;
    std::unique_ptr<JsonlAppender> stage1_, stage2_, stage3_, failures_, completions_;
};

class SampleRunner {
public:
    SampleRunner(const RunSpec& spec, const EvaluationConfig& config, const PromptBuilder& builder,
                 Backend& backend)
        : spec_(spec), config_(config), builder_(builder), backend_(backend) {}

    SampleResult run(const EvaluationSample& sample) const {
        SampleResult result;
        std::vector<FailureEntry> plan_failures;
        std::vector<PlannedCall> calls;
        try {
            calls = plan_sample(sample, spec_, builder_, config_, &plan_failures);
        } catch (const std::exception& e) {
            result.failures.push_back({sample.sample_id, *spec_.stages_enabled.begin(), Stage::kInteraction,
                                       std::nullopt, "validation", e.what()});
            return result;
        }
        result.failures = std::move(plan_failures);
        for (const auto& call : calls) execute(sample, call, result);
        return result;
    }

private:
    void execute(const EvaluationSample& sample, const PlannedCall& call, SampleResult& out) const {
        const int stage = tier_of(call.agent);
        std::vector<std::string> diagnostics;
        for (int attempt = 0; attempt <= spec_.reask_limit; ++attempt) {
            const auto prompt = attempt == 0 ? call.prompt : reask_prompt(call.prompt, attempt);
            CompletionRecord completion;
            try {
                completion = backend_.complete(prompt);
            } catch (const BackendError& e) {
                out.failures.push_back({sample.sample_id, stage, call.agent, call.target,
                                        std::string(to_string(e.kind())), e.what()});
                return;
            } catch (const std::exception& e) {
                out.failures.push_back({sample.sample_id, stage, call.agent, call.target, "internal", e.what()});
                return;
            }
            out.completions.push_back(completion);
            if (accept(sample, call, completion.raw_output, out, diagnostics)) return;
            spdlog::debug("{} {} {}: unparsable output (attempt {})", sample.sample_id,
                          to_string(call.agent), call.target.to_string(), attempt + 1);
        }
        out.failures.push_back({sample.sample_id, stage, call.agent, call.target, "parse",
                                join(diagnostics, "; ")});
    }

    bool accept(const EvaluationSample& sample, const PlannedCall& call, const std::string& raw,
                SampleResult& out, std::vector<std::string>& diagnostics) const {
        const auto& t = call.target;
        switch (call.agent) {
            case Stage::kInteraction: {
                auto o = parse_interaction_output(raw, config_.tasks.at(sample.task_id));
                diagnostics = o.diagnostics;
                if (!o.succeeded()) return false;
                o.verdict->sample_id = sample.sample_id;
                o.verdict->system_id = t.system_a;
                out.stage1.push_back(std::move(*o.verdict));
                return true;
            }
            case Stage::kSemantic: {
                auto o = parse_semantic_output(raw, config_.error_tags);
                diagnostics = o.diagnostics;
                if (!o.succeeded()) return false;
                o.verdict->sample_id = sample.sample_id;
                o.verdict->system_a = t.system_a;
                o.verdict->system_b = *t.system_b;
                out.stage2.push_back(std::move(*o.verdict));
                return true;
            }
            case Stage::kExperienceSingle: {
                auto o = parse_experience_single(raw, config_.cause_tags);
                diagnostics = o.diagnostics;
                if (!o.succeeded()) return false;
                o.verdict->sample_id = sample.sample_id;
                o.verdict->system_id = t.system_a;
                out.stage3_single.push_back(std::move(*o.verdict));
                return true;
            }
            case Stage::kExperiencePair: {
                auto o = parse_experience_pair(raw);
                diagnostics = o.diagnostics;
                if (!o.succeeded()) return false;
                o.verdict->sample_id = sample.sample_id;
                o.verdict->system_a = t.system_a;
                o.verdict->system_b = *t.system_b;
                out.stage3_pair.push_back(std::move(*o.verdict));
                return true;
            }
        }
        return false;
    }

    const RunSpec& spec_;
    const EvaluationConfig& config_;
    const PromptBuilder& builder_;
    Backend& backend_;
};

void check_run_inputs(const RunSpec& spec, const std::vector<EvaluationSample>& samples,
                      const EvaluationConfig& config, const TemplateRegistry& templates) {
    spec.validate();
    std::set<std::string> ids;
    std::set<std::string> systems;
    for (const auto& s : samples) {
        if (!ids.insert(s.sample_id).second) {
            throw ValidationError("dataset: duplicate sample_id '" + s.sample_id + "'");
        }
        validate_sample(s, config.tasks);
        for (const auto& [id, text] : s.responses) systems.insert(id);
        if (spec.stage_enabled(1)) templates.at(config.tasks.at(s.task_id).prompt_template_ref);
    }
    if (!spec.all_pairs && (spec.stage_enabled(2) || spec.stage_enabled(3))) {
        for (const auto& [a, b] : spec.system_pairs) {
            for (const auto* id : {&a, &b}) {
                if (!systems.count(*id)) {
                    throw ValidationError("run spec: system '" + *id + "' does not occur in the dataset");
                }
            }
        }
    }
    if (spec.stage_enabled(2)) templates.at("semantic.default");
    if (spec.stage_enabled(3)) {
        templates.at("experience_single.default");
        templates.at("experience_pair.default");
    }
}

void finalize_run_dir(const fs::path& dir, const RunRecord& record) {
    auto lines = [](const auto& items) {
        std::string out;
        for (const auto& item : items) out += to_line(to_json(item)) + "\n";
        return out;
    };
    write_file_atomic(dir / "verdicts_stage1.jsonl", lines(record.stage1));
    write_file_atomic(dir / "verdicts_stage2.jsonl", lines(record.stage2));
    write_file_atomic(dir / "verdicts_stage3.jsonl",
                      lines(record.stage3_single) + lines(record.stage3_pair));
    write_file_atomic(dir / "failures.jsonl", lines(record.failures));
    write_file_atomic(dir / "completions.jsonl", lines(record.completions));

    const auto c = record.counts();
    Json header = {{"run_id", record.run_id},
                   {"model_id", record.model_id},
                   {"started_at", record.started_at},
                   {"finished_at", record.finished_at},
                   {"counts",
                    {{"stage1", c.stage1},
                     {"stage2", c.stage2},
                     {"stage3_single", c.stage3_single},
                     {"stage3_pair", c.stage3_pair},
                     {"failures", c.failures},
                     {"completions", c.completions}}}};
    auto manifest = build_manifest(dir, {std::begin(kRunFiles), std::end(kRunFiles)}, std::move(header));
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace

RunRecord run_pipeline(const RunSpec& spec, const std::vector<EvaluationSample>& samples,
                       const EvaluationConfig& config, const TemplateRegistry& templates,
                       Backend& backend, const RunOptions& options) {
    check_run_inputs(spec, samples, config, templates);

    const auto& dir = options.run_dir;
    if (!dir.empty()) {
        if (fs::exists(dir)) {
            if (!options.force) {
                throw ConflictError("run '" + spec.run_id + "' already exists (use --force to replace it)");
            }
            fs::remove_all(dir);
        }
        fs::create_directories(dir);
        write_file_atomic(dir / "spec.json", to_json(spec).dump(2) + "\n");
    }

    RunRecord record;
    record.run_id = spec.run_id;
    record.spec = spec;
    record.model_id = backend.config().model_id;
    record.started_at = utc_timestamp();

    PromptBuilder builder(templates, config);
    SampleRunner runner(spec, config, builder, backend);
    RunSink sink(record, dir);

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::atomic<bool> stop{false};
    std::exception_ptr sink_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            if (stop.load()) return;
            const auto i = next.fetch_add(1);
            if (i >= samples.size()) return;
            auto result = runner.run(samples[i]);
            try {
                sink.accept(std::move(result));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!sink_error) sink_error = std::current_exception();
                stop.store(true);
                return;
            }
            const auto n = done.fetch_add(1) + 1;
            if (options.progress) options.progress(n, samples.size());
        }
    };

    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(spec.parallelism),
                                                std::max<std::size_t>(samples.size(), 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (sink_error) std::rethrow_exception(sink_error);

    record.finished_at = utc_timestamp();
    record.canonicalize();
    if (!dir.empty()) finalize_run_dir(dir, record);
    spdlog::info("run {}: {} samples, {} failures", record.run_id, samples.size(), record.failures.size());
    return record;
}

std::vector<EvaluationSample> resolve_dataset(const Store& store, const std::string& dataset_ref,
                                              const TaskRegistry& tasks) {
    bool is_id = true;
    try {
        check_identifier(dataset_ref, "dataset id");
    } catch (const ValidationError&) {
        is_id = false;
    }
    if (is_id && store.has_dataset(dataset_ref)) return store.load_dataset(dataset_ref, tasks);
    if (fs::is_regular_file(dataset_ref)) {
        return load_samples_file(dataset_ref, ParseMode::kStrict, tasks).samples;
    }
    throw NotFoundError("dataset '" + dataset_ref + "' is neither a stored dataset nor a file");
}

RunRecord execute_run(Store& store, const RunSpec& spec, const EvaluationConfig& config,
                      const TemplateRegistry& templates, bool force,
                      std::function<void(std::size_t, std::size_t)> progress) {
    spec.validate();
    auto samples = resolve_dataset(store, spec.dataset_ref, config.tasks);
    if (spec.model_config_ref.empty()) throw ValidationError("run spec: model_config_ref is required");
    auto backend = make_backend(ModelConfig::load(spec.model_config_ref));
    RunOptions options;
    options.run_dir = store.run_dir(spec.run_id);
    options.force = force;
    options.progress = std::move(progress);
    return run_pipeline(spec, samples, config, templates, *backend, options);
}

RunRecord load_run(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) {
        throw NotFoundError("no finalized run at '" + dir.string() + "'");
    }
    Json manifest = Json::parse(read_file(dir / "manifest.json"), nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object()) {
        throw StorageError("malformed manifest in '" + dir.string() + "'");
    }
    for (const auto* name : kRunFiles) {
        const auto& files = manifest["files"];
        if (!files.is_object() || !files.contains(name)) {
            throw StorageError("manifest in '" + dir.string() + "' does not list " + name);
        }
    }
    Store::verify_manifest(dir);

    RunRecord record;
    try {
        record.run_id = manifest.at("run_id").get<std::string>();
        record.model_id = manifest.at("model_id").get<std::string>();
        record.started_at = manifest.at("started_at").get<std::string>();
        record.finished_at = manifest.at("finished_at").get<std::string>();
    } catch (const Json::exception& e) {
        throw StorageError("manifest in '" + dir.string() + "': " + e.what());
    }
    Json spec_doc = Json::parse(read_file(dir / "spec.json"), nullptr, false);
    record.spec = RunSpec::from_json(spec_doc);
    for (const auto& doc : read_jsonl(dir / "verdicts_stage1.jsonl")) {
        record.stage1.push_back(interaction_verdict_from_json(doc, ParseMode::kLenient));
    }
    for (const auto& doc : read_jsonl(dir / "verdicts_stage2.jsonl")) {
        record.stage2.push_back(comparison_verdict_from_json(doc, ParseMode::kLenient));
    }
    for (const auto& doc : read_jsonl(dir / "verdicts_stage3.jsonl")) {
        if (doc.contains("system_id")) {
            record.stage3_single.push_back(satisfaction_verdict_from_json(doc, ParseMode::kLenient));
        } else {
            record.stage3_pair.push_back(preference_verdict_from_json(doc, ParseMode::kLenient));
        }
    }
    for (const auto& doc : read_jsonl(dir / "failures.jsonl")) record.failures.push_back(failure_from_json(doc));
    for (const auto& doc : read_jsonl(dir / "completions.jsonl")) {
        record.completions.push_back(completion_from_json(doc));
    }
    record.canonicalize();
    return record;
}

}  // namespace agenteval
