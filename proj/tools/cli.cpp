#include "cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include <pthread.h>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "agenteval/errors.hpp"
#include "agenteval/ingestion.hpp"
#include "agenteval/metrics.hpp"
#include "agenteval/orchestrator.hpp"
#include "agenteval/persistence.hpp"
#include "agenteval/report.hpp"
#include "agenteval/service.hpp"
#include "agenteval/sft.hpp"

namespace agenteval {

namespace {

// Settings shared by every subcommand. Precedence: flag, environment,
// config file, default.
struct CliConfig {
    fs::path store_root = "store";
    std::string model_config;  // used when a run spec names none
    std::string templates_dir;
    std::string eval_config;
    std::string log_level = "warn";
    bool json = false;
};

struct GlobalFlags {
    std::string config_path;
    std::string store;
    std::string model_config;
    std::string templates;
    std::string eval_config;
    std::string log_level;
    bool json = false;
};

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

CliConfig resolve_config(const GlobalFlags& flags) {
    CliConfig c;
    std::string path = flags.config_path.empty() ? env_or_empty("AGENTEVAL_CONFIG") : flags.config_path;
    if (!path.empty()) {
        Json doc = Json::parse(read_file(path), nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) throw ValidationError("config '" + path + "' is not a JSON object");
        const fs::path base = fs::path(path).parent_path();
        auto rel = [&](const std::string& v) { return v.empty() || fs::path(v).is_absolute() ? v : (base / v).string(); };
        try {
            if (doc.contains("store")) c.store_root = rel(doc["store"].get<std::string>());
            if (doc.contains("model_config")) c.model_config = rel(doc["model_config"].get<std::string>());
            if (doc.contains("templates")) c.templates_dir = rel(doc["templates"].get<std::string>());
            if (doc.contains("eval_config")) c.eval_config = rel(doc["eval_config"].get<std::string>());
            if (doc.contains("log_level")) c.log_level = doc["log_level"].get<std::string>();
        } catch (const Json::exception& e) {
            throw ValidationError("config '" + path + "': " + e.what());
        }
    }
    if (auto s = env_or_empty("AGENTEVAL_STORE"); !s.empty()) c.store_root = s;
    if (!flags.store.empty()) c.store_root = flags.store;
    if (!flags.model_config.empty()) c.model_config = flags.model_config;
    if (!flags.templates.empty()) c.templates_dir = flags.templates;
    if (!flags.eval_config.empty()) c.eval_config = flags.eval_config;
    if (!flags.log_level.empty()) c.log_level = flags.log_level;
    c.json = flags.json;
    return c;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::kUsage: return kExitUsage;
        case ErrorCode::kBackend: return kExitBackend;
        case ErrorCode::kStorage: return kExitStorage;
        default: return kExitValidation;
    }
}

// Routes library logging to `err` for the duration of one invocation.
class LogScope {
public:
    LogScope(std::ostream& err, const std::string& level) : previous_(spdlog::default_logger()) {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
        sink->set_pattern("%l: %v");
        auto logger = std::make_shared<spdlog::logger>("agenteval", sink);
        logger->set_level(spdlog::level::from_str(level));
        spdlog::set_default_logger(logger);
    }
    ~LogScope() { spdlog::set_default_logger(previous_); }

private:
    std::shared_ptr<spdlog::logger> previous_;
};

struct Context {
    CliConfig config;
    EvaluationConfig evaluation;
    TemplateRegistry templates;
    std::ostream& out;
    std::ostream& err;

    Store store() const { return Store(config.store_root); }
};

fs::path resolve_run_dir(const Context& ctx, const std::string& run) {
    if (fs::is_directory(run) && fs::exists(fs::path(run) / "manifest.json")) return run;
    check_identifier(run, "run id");
    return ctx.store().run_dir(run);
}

// The store ledger of a dataset, if `dataset_ref` is a dataset id with one.
std::optional<fs::path> store_ledger(const Context& ctx, const std::string& dataset_ref) {
    try {
        check_identifier(dataset_ref, "dataset id");
    } catch (const ValidationError&) {
        return std::nullopt;
    }
    auto p = ctx.store().ledger_path(dataset_ref);
    if (!fs::exists(p)) return std::nullopt;
    return p;
}

// A ledger file path, or the id of a dataset whose store ledger is meant.
fs::path resolve_ledger_path(const Context& ctx, const std::string& labels) {
    if (fs::exists(labels)) return labels;
    if (auto p = store_ledger(ctx, labels)) return *p;
    throw NotFoundError("no annotation ledger at '" + labels + "'");
}

std::vector<HumanLabel> final_labels_from(const fs::path& ledger, int annotators) {
    std::vector<LedgerEntry> entries;
    for (const auto& doc : read_jsonl(ledger)) entries.push_back(ledger_entry_from_json(doc));
    std::vector<HumanLabel> out;
    for (auto& [key, label] : resolve_ledger(entries, annotators).final_labels) out.push_back(label);
    return out;
}

Json counts_json(const RunCounts& c) {
    return {{"stage1", c.stage1},           {"stage2", c.stage2},     {"stage3_single", c.stage3_single},
            {"stage3_pair", c.stage3_pair}, {"failures", c.failures}, {"completions", c.completions}};
}

// -- subcommands ---------------------------------------------------------------

struct IngestArgs {
    std::string file;
    std::string mode = "strict";
    std::string dataset_id;
};

int cmd_ingest(Context& ctx, const IngestArgs& a) {
    const auto mode = a.mode == "lenient" ? ParseMode::kLenient : ParseMode::kStrict;
    auto loaded = load_samples_file(a.file, mode, ctx.evaluation.tasks);
    const std::string id = a.dataset_id.empty() ? fs::path(a.file).stem().string() : a.dataset_id;
    ctx.store().put_dataset(id, loaded.samples);
    if (ctx.config.json) {
        Json skipped = Json::array();
        for (const auto& s : loaded.skipped) skipped.push_back({{"line", s.line_number}, {"reason", s.reason}});
        ctx.out << Json{{"dataset_id", id},
                        {"samples", loaded.samples.size()},
                        {"rejected", loaded.skipped.size()},
                        {"skipped", skipped}}
                       .dump(2)
                << "\n";
    } else {
        ctx.out << "dataset " << id << "\n";
        ctx.out << loaded.samples.size() << " samples, " << loaded.skipped.size() << " rejected\n";
        for (const auto& s : loaded.skipped) ctx.out << "  line " << s.line_number << ": " << s.reason << "\n";
    }
    return kExitOk;
}

struct RunArgs {
    std::string spec;
    bool strict = false;
    bool force = false;
};

int cmd_run(Context& ctx, const RunArgs& a) {
    auto spec = RunSpec::load(a.spec);
    if (spec.model_config_ref.empty()) spec.model_config_ref = ctx.config.model_config;
    auto store = ctx.store();
    auto record = execute_run(store, spec, ctx.evaluation, ctx.templates, a.force);
    const auto counts = record.counts();
    if (ctx.config.json) {
        ctx.out << Json{{"run_id", record.run_id},
                        {"run_dir", store.run_dir(record.run_id).string()},
                        {"model_id", record.model_id},
                        {"counts", counts_json(counts)}}
                       .dump(2)
                << "\n";
    } else {
        ctx.out << "run " << record.run_id << "\n";
        ctx.out << "stage 1: " << counts.stage1 << " verdicts\n"
                << "stage 2: " << counts.stage2 << " verdicts\n"
                << "stage 3: " << counts.stage3_single << " satisfaction, " << counts.stage3_pair
                << " preference verdicts\n"
                << "failures: " << counts.failures << "\n";
    }
    if (a.strict && counts.failures > 0) {
        ctx.err << "error: " << counts.failures << " failures (--strict)\n";
        return kExitBackend;
    }
    return kExitOk;
}

struct ScoreArgs {
    std::string run;
    std::string labels;
    int annotators = 2;
};

int cmd_score(Context& ctx, const ScoreArgs& a) {
    auto run = load_run(resolve_run_dir(ctx, a.run));
    auto finals = final_labels_from(resolve_ledger_path(ctx, a.labels), a.annotators);
    auto report = agreement_report(run, finals);
    if (ctx.config.json) {
        ctx.out << to_json(report).dump(2) << "\n";
        return kExitOk;
    }
    AgreementTable table;
    AgreementTable::Row row{report.model_id, {}};
    for (const auto& e : report.entries) {
        table.columns.push_back(e.stage);
        row.rates[e.stage] = e.rate_hundredths;
    }
    table.rows.push_back(row);
    if (!report.entries.empty()) ctx.out << render_agreement_table(table);
    for (const auto& e : report.entries) {
        ctx.out << column_label(e.stage) << ": " << e.agree_count << "/" << e.total << " agree\n";
    }
    for (auto stage : report.no_data) ctx.out << column_label(stage) << ": no data\n";
    return kExitOk;
}

struct ReportArgs {
    std::string run;
    std::string format = "md";
    std::string labels;
    std::string out_path;
    int annotators = 2;
};

int cmd_report(Context& ctx, const ReportArgs& a) {
    const auto format = parse_report_format(a.format);
    if (!format) throw UsageError("--format must be md or csv");
    auto run = load_run(resolve_run_dir(ctx, a.run));
    auto samples = resolve_dataset(ctx.store(), run.spec.dataset_ref, ctx.evaluation.tasks);
    std::optional<std::vector<HumanLabel>> finals;
    if (!a.labels.empty()) {
        finals = final_labels_from(resolve_ledger_path(ctx, a.labels), a.annotators);
    } else if (auto p = store_ledger(ctx, run.spec.dataset_ref)) {
        finals = final_labels_from(*p, a.annotators);
    }
    const auto text = render_report(report_data(run, samples, finals ? &*finals : nullptr), *format);
    if (!a.out_path.empty()) write_file_atomic(a.out_path, text);
    if (ctx.config.json) {
        ctx.out << Json{{"run_id", run.run_id}, {"format", std::string(file_extension(*format))}, {"content", text}}
                       .dump(2)
                << "\n";
    } else {
        ctx.out << text;
    }
    return kExitOk;
}

struct ExportArgs {
    std::string dataset;
    std::string labels;
    std::string out_path;
    bool include_preference = false;
    int annotators = 2;
};

int cmd_export_sft(Context& ctx, const ExportArgs& a) {
    auto samples = resolve_dataset(ctx.store(), a.dataset, ctx.evaluation.tasks);
    auto finals = final_labels_from(resolve_ledger_path(ctx, a.labels), a.annotators);
    auto exported = export_sft(samples, finals, ctx.evaluation, ctx.templates, {a.include_preference});
    std::string body;
    for (const auto& r : exported.records) body += r.dump() + "\n";
    write_file_atomic(a.out_path, body);
    if (ctx.config.json) {
        Json skipped = Json::array();
        for (const auto& s : exported.skipped) skipped.push_back({{"item", to_json(s.key)}, {"reason", s.reason}});
        ctx.out << Json{{"out", a.out_path},
                        {"records", exported.records.size()},
                        {"candidates", exported.candidates},
                        {"skipped", skipped},
                        {"unmatched_labels", exported.unmatched_labels}}
                       .dump(2)
                << "\n";
    } else {
        ctx.out << exported.records.size() << " records written to " << a.out_path << " ("
                << exported.skipped.size() << " of " << exported.candidates << " candidates skipped)\n";
    }
    return kExitOk;
}

struct LossArgs {
    std::string preds;
    std::string labels;
    LossConfig weights;
    int annotators = 2;
};

int cmd_loss(Context& ctx, const LossArgs& a) {
    a.weights.validate();
    std::vector<PredictedDistribution> preds;
    for (const auto& doc : read_jsonl(a.preds)) preds.push_back(predicted_distribution_from_json(doc));
    auto finals = final_labels_from(resolve_ledger_path(ctx, a.labels), a.annotators);
    auto loss = loss_from_predictions(preds, finals, a.weights);
    if (ctx.config.json) {
        ctx.out << to_json(loss).dump(2) << "\n";
    } else {
        auto line = [&](const char* name, double v, std::int64_t n) {
            ctx.out << name << ": " << v << " (" << n << " items)\n";
        };
        line("content", loss.l_content, loss.content_items);
        line("consistency", loss.l_consistency, loss.consistency_items);
        line("experience", loss.l_experience, loss.experience_items);
        ctx.out << "total: " << loss.total << "\n";
    }
    return kExitOk;
}

struct ServeArgs {
    std::string service_config;
    std::string host;
    int port = -1;
};

int cmd_serve(Context& ctx, const ServeArgs& a) {
    Json doc = Json::object();
    if (!a.service_config.empty()) {
        doc = Json::parse(read_file(a.service_config), nullptr, false);
        if (doc.is_discarded()) throw ValidationError("service config is not valid JSON");
    }
    auto config = ServiceConfig::from_json(doc);
    if (!doc.contains("store") && env_or_empty("AGENTEVAL_STORE").empty()) config.store_root = ctx.config.store_root;
    if (!a.host.empty()) config.host = a.host;
    if (a.port >= 0) config.port = a.port;

    // Handle SIGINT/SIGTERM on this thread only.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Service service(config, ctx.evaluation, ctx.templates);
    const int port = service.start();
    ctx.out << "listening on http://" << config.host << ":" << port << "\n" << std::flush;
    int sig = 0;
    sigwait(&signals, &sig);
    ctx.err << "shutting down\n";
    service.stop();
    service.wait_for_runs();
    pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-tier LLM evaluation pipeline", "agenteval"};
    app.require_subcommand(1);
    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "CLI config JSON (env AGENTEVAL_CONFIG)");
    app.add_option("--store", flags.store, "Store root (env AGENTEVAL_STORE)");
    app.add_option("--model-config", flags.model_config, "Model config used when a run spec names none");
    app.add_option("--templates", flags.templates, "Directory of prompt template overrides");
    app.add_option("--eval-config", flags.eval_config, "Task types and tag vocabularies JSON");
    app.add_option("--log-level", flags.log_level, "trace, debug, info, warn, error, off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));
    app.add_flag("--json", flags.json, "Machine-readable JSON on stdout");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate a sample JSONL file and store it as a dataset");
    ingest_cmd->add_option("file", ingest.file, "Sample JSONL")->required();
    ingest_cmd->add_option("--mode", ingest.mode, "strict or lenient")->check(CLI::IsMember({"strict", "lenient"}));
    ingest_cmd->add_option("--dataset-id", ingest.dataset_id, "Defaults to the file stem");

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Execute an evaluation run");
    run_cmd->add_option("--spec", run.spec, "Run spec JSON")->required();
    run_cmd->add_flag("--strict", run.strict, "Exit 3 when any item failed");
    run_cmd->add_flag("--force", run.force, "Replace an existing run directory");

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "Agreement between a run and final human labels");
    score_cmd->add_option("--run", score.run, "Run id or run directory")->required();
    score_cmd->add_option("--labels", score.labels, "Annotation ledger path or dataset id")->required();
    score_cmd->add_option("--annotators", score.annotators, "Annotators per item")->check(CLI::Range(1, 16));

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Render a run report");
    report_cmd->add_option("--run", report.run, "Run id or run directory")->required();
    report_cmd->add_option("--format", report.format, "md or csv");
    report_cmd->add_option("--labels", report.labels, "Annotation ledger path or dataset id");
    report_cmd->add_option("--out", report.out_path, "Also write the report to this file");
    report_cmd->add_option("--annotators", report.annotators, "Annotators per item")->check(CLI::Range(1, 16));

    ExportArgs exp;
    auto* export_cmd = app.add_subcommand("export-sft", "Write fine-tuning records from final human labels");
    export_cmd->add_option("--dataset", exp.dataset, "Dataset id or sample JSONL")->required();
    export_cmd->add_option("--labels", exp.labels, "Annotation ledger path or dataset id")->required();
    export_cmd->add_option("--out", exp.out_path, "Output JSONL")->required();
    export_cmd->add_flag("--include-preference", exp.include_preference, "Also export pairwise preference items");
    export_cmd->add_option("--annotators", exp.annotators, "Annotators per item")->check(CLI::Range(1, 16));

    LossArgs loss;
    auto* loss_cmd = app.add_subcommand("loss", "Composite loss of predicted distributions against final labels");
    loss_cmd->add_option("--preds", loss.preds, "Predicted distributions JSONL")->required();
    loss_cmd->add_option("--labels", loss.labels, "Annotation ledger path or dataset id")->required();
    loss_cmd->add_option("--alpha", loss.weights.alpha, "Content weight");
    loss_cmd->add_option("--beta", loss.weights.beta, "Consistency weight");
    loss_cmd->add_option("--gamma", loss.weights.gamma, "Experience weight");
    loss_cmd->add_option("--annotators", loss.annotators, "Annotators per item")->check(CLI::Range(1, 16));

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the REST API");
    serve_cmd->add_option("--port", serve.port, "0 picks a free port (env PORT)")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", serve.host, "Bind address");
    serve_cmd->add_option("--service-config", serve.service_config, "Service config JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        Context ctx{resolve_config(flags), {}, {}, out, err};
        LogScope logging(err, ctx.config.log_level);
        if (!ctx.config.eval_config.empty()) ctx.evaluation = EvaluationConfig::load(ctx.config.eval_config);
        ctx.templates = ctx.config.templates_dir.empty() ? TemplateRegistry::defaults()
                                                         : TemplateRegistry::load_directory(ctx.config.templates_dir);

        if (*ingest_cmd) return cmd_ingest(ctx, ingest);
        if (*run_cmd) return cmd_run(ctx, run);
        if (*score_cmd) return cmd_score(ctx, score);
        if (*report_cmd) return cmd_report(ctx, report);
        if (*export_cmd) return cmd_export_sft(ctx, exp);
        if (*loss_cmd) return cmd_loss(ctx, loss);
        if (*serve_cmd) return cmd_serve(ctx, serve);
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitStorage;
    }
}

}  // namespace agenteval
