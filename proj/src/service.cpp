#include "agenteval/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "agenteval/errors.hpp"
#include "agenteval/ingestion.hpp"
#include "agenteval/metrics.hpp"
#include "agenteval/orchestrator.hpp"
#include "agenteval/persistence.hpp"
#include "agenteval/report.hpp"

namespace agenteval {

ServiceConfig ServiceConfig::from_json(const Json& doc) {
    if (!doc.is_object()) throw ValidationError("service config must be a JSON object");
    ServiceConfig c;
    try {
        c.store_root = doc.value("store", c.store_root.string());
        c.host = doc.value("host", c.host);
        c.port = doc.value("port", c.port);
        c.annotators_per_item = doc.value("annotators_per_item", c.annotators_per_item);
        c.page_size = doc.value("page_size", c.page_size);
        c.queue_size = doc.value("queue_size", c.queue_size);
        if (doc.contains("reservation_ttl_seconds")) {
            c.reservation_ttl = std::chrono::seconds(doc.at("reservation_ttl_seconds").get<int>());
        }
        if (doc.contains("tokens")) c.tokens = doc.at("tokens").get<std::map<std::string, std::string>>();
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("service config: ") + e.what());
    }
    if (const char* port = std::getenv("PORT"); port && *port) c.port = std::atoi(port);
    if (const char* store = std::getenv("AGENTEVAL_STORE"); store && *store) c.store_root = store;
    if (c.annotators_per_item < 1) throw ValidationError("service config: annotators_per_item must be >= 1");
    if (c.page_size == 0 || c.queue_size == 0) throw ValidationError("service config: sizes must be positive");
    return c;
}

namespace {

using Monotonic = std::chrono::steady_clock;

struct ApiFailure {
    int status;
    std::string code;
    std::string message;
    Json detail = nullptr;
};

ApiFailure classify(const Error& e) {
    switch (e.code()) {
        case ErrorCode::kNotFound: return {404, "not_found", e.what()};
        case ErrorCode::kConflict:
        case ErrorCode::kDuplicate: return {409, "conflict", e.what()};
        case ErrorCode::kValidation:
        case ErrorCode::kRange:
        case ErrorCode::kUsage: return {400, "validation", e.what()};
        default: return {500, "internal", e.what()};
    }
}

void send_error(httplib::Response& res, const ApiFailure& f) {
    res.status = f.status;
    Json body = {{"error", {{"code", f.code}, {"message", f.message}, {"detail", f.detail}}}};
    res.set_content(body.dump(), "application/json");
}

void send_json(httplib::Response& res, const Json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

Json parse_body(const httplib::Request& req) {
    Json doc = Json::parse(req.body, nullptr, false);
    if (doc.is_discarded()) throw ValidationError("request body is not valid JSON");
    return doc;
}

std::optional<std::string> header(const httplib::Request& req, const char* name) {
    if (!req.has_header(name)) return std::nullopt;
    return req.get_header_value(name);
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
}

std::size_t size_param(const httplib::Request& req, const char* name, std::size_t fallback) {
    auto v = param(req, name);
    if (!v) return fallback;
    try {
        std::size_t pos = 0;
        auto n = std::stoull(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("trailing characters");
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw ValidationError(std::string("query parameter '") + name + "' must be a non-negative integer");
    }
}

struct RunState {
    std::string status = "queued";  // queued, running, completed, failed
    std::size_t done = 0;
    std::size_t total = 0;
    std::string error;
    std::optional<RunCounts> counts;
};

Json counts_json(const RunCounts& c) {
    return {{"stage1", c.stage1},           {"stage2", c.stage2},     {"stage3_single", c.stage3_single},
            {"stage3_pair", c.stage3_pair}, {"failures", c.failures}, {"completions", c.completions}};
}

}  // namespace

struct Service::Impl {
    ServiceConfig config;
    EvaluationConfig evaluation;
    TemplateRegistry templates;
    Store store;
    httplib::Server server;
    std::thread listener;
    int port = 0;

    std::mutex mutex;  // datasets, ledgers, reservations, runs
    std::map<std::string, std::shared_ptr<const std::vector<EvaluationSample>>> datasets;
    std::map<std::string, std::unique_ptr<AnnotationLedger>> ledgers;
    // dataset -> item -> annotator -> expiry
    std::map<std::string, std::map<LabelKey, std::map<std::string, Monotonic::time_point>>> reservations;
    std::map<std::string, RunState> runs;
    std::vector<std::thread> run_threads;

    Impl(ServiceConfig c, EvaluationConfig e, TemplateRegistry t)
        : config(std::move(c)), evaluation(std::move(e)), templates(std::move(t)), store(config.store_root) {
        routes();
    }

    // -- helpers -----------------------------------------------------------

    std::shared_ptr<const std::vector<EvaluationSample>> dataset(const std::string& id) {
        std::lock_guard lock(mutex);
        return dataset_locked(id);
    }

    std::shared_ptr<const std::vector<EvaluationSample>> dataset_locked(const std::string& id) {
        if (auto it = datasets.find(id); it != datasets.end()) return it->second;
        check_identifier(id, "dataset id");
        auto samples = std::make_shared<const std::vector<EvaluationSample>>(
            store.load_dataset(id, evaluation.tasks));
        datasets.emplace(id, samples);
        return samples;
    }

    AnnotationLedger& ledger_locked(const std::string& dataset_id) {
        auto it = ledgers.find(dataset_id);
        if (it == ledgers.end()) {
            it = ledgers
                     .emplace(dataset_id, std::make_unique<AnnotationLedger>(store.ledger_path(dataset_id),
                                                                             config.annotators_per_item))
                     .first;
        }
        return *it->second;
    }

    AnnotationLedger& ledger(const std::string& dataset_id) {
        std::lock_guard lock(mutex);
        return ledger_locked(dataset_id);
    }

    std::string dataset_param(const httplib::Request& req) {
        if (auto d = param(req, "dataset")) {
            if (!store.has_dataset(*d)) throw NotFoundError("unknown dataset '" + *d + "'");
            return *d;
        }
        auto ids = store.dataset_ids();
        if (ids.size() == 1) return ids.front();
        throw ValidationError("query parameter 'dataset' is required when the store holds " +
                              std::to_string(ids.size()) + " datasets");
    }

    // Annotator from the bearer token when tokens are configured.
    std::optional<std::string> token_annotator(const httplib::Request& req) {
        if (config.tokens.empty()) return std::nullopt;
        auto auth = header(req, "Authorization");
        const std::string prefix = "Bearer ";
        if (auth && auth->rfind(prefix, 0) == 0) {
            if (auto it = config.tokens.find(auth->substr(prefix.size())); it != config.tokens.end()) {
                return it->second;
            }
        }
        throw ApiFailure{401, "validation", "missing or unknown bearer token"};
    }

    HumanLabel label_from_request(const httplib::Request& req) {
        Json doc = parse_body(req);
        if (!doc.is_object()) throw ValidationError("label body must be a JSON object");
        if (auto who = token_annotator(req)) {
            if (doc.contains("annotator_id") && doc["annotator_id"] != *who) {
                throw ApiFailure{403, "validation", "annotator_id does not match the bearer token"};
            }
            doc["annotator_id"] = *who;
        }
        return human_label_from_json(doc);
    }

    const EvaluationSample& find_sample(const std::vector<EvaluationSample>& samples, const std::string& id) {
        auto it = std::find_if(samples.begin(), samples.end(), [&](const auto& s) { return s.sample_id == id; });
        if (it == samples.end()) throw ValidationError("unknown sample_id '" + id + "'");
        return *it;
    }

    Json item_json(const EvaluationSample& sample, const LabelKey& key) {
        Json responses = Json::object();
        responses[key.target.system_a] = sample.responses.at(key.target.system_a);
        if (key.target.system_b) responses[*key.target.system_b] = sample.responses.at(*key.target.system_b);
        const char* agent = key.stage == 1   ? "interaction"
                            : key.stage == 2 ? "semantic"
                            : key.target.is_pair() ? "experience_pair"
                                                   : "experience_single";
        Json item = {{"item", to_json(key)},
                     {"agent", agent},
                     {"task_id", sample.task_id},
                     {"first_order_dimension", to_string(sample.first_order_dimension)},
                     {"responses", responses}};
        // Experience items are judged from the response alone.
        if (key.stage < 3) item["paragraph"] = normalize_input(sample).paragraph;
        if (key.stage == 1) item["dimension_names"] = evaluation.tasks.at(sample.task_id).dimension_names;
        return item;
    }

    // -- routes ------------------------------------------------------------

    template <typename F>
    httplib::Server::Handler guarded(F&& f) {
        return [this, f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const ApiFailure& e) {
                send_error(res, e);
            } catch (const Error& e) {
                send_error(res, classify(e));
            } catch (const std::exception& e) {
                send_error(res, {500, "internal", e.what()});
            }
        };
    }

    void routes() {
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
            const bool missing = res.status == 404;
            send_error(res, {res.status, missing ? "not_found" : res.status >= 500 ? "internal" : "validation",
                             missing ? "no such endpoint" : "request rejected"});
            return httplib::Server::HandlerResponse::Handled;
        });
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
            send_error(res, {500, "internal", "unhandled exception"});
        });

        server.Get("/health", guarded([](const auto&, auto& res) { send_json(res, {{"status", "ok"}}); }));

        server.Get("/datasets", guarded([this](const auto&, auto& res) {
            send_json(res, {{"datasets", store.dataset_ids()}});
        }));
        server.Post(R"(/datasets/([^/]+))", guarded([this](const httplib::Request& req, auto& res) {
            const std::string id = req.matches[1];
            const auto mode_text = param(req, "mode").value_or("strict");
            if (mode_text != "strict" && mode_text != "lenient") {
                throw ValidationError("mode must be strict or lenient");
            }
            std::istringstream in(req.body);
            auto loaded = load_samples(in, mode_text == "strict" ? ParseMode::kStrict : ParseMode::kLenient,
                                       evaluation.tasks);
            {
                std::lock_guard lock(mutex);
                store.put_dataset(id, loaded.samples);
                datasets.erase(id);
            }
            Json skipped = Json::array();
            for (const auto& s : loaded.skipped) skipped.push_back({{"line", s.line_number}, {"reason", s.reason}});
            send_json(res,
                      {{"dataset_id", id}, {"samples", loaded.samples.size()}, {"rejected", loaded.skipped.size()},
                       {"skipped", skipped}},
                      201);
        }));
        server.Get(R"(/datasets/([^/]+)/samples)", guarded([this](const httplib::Request& req, auto& res) {
            const std::string id = req.matches[1];
            if (!store.has_dataset(id)) throw NotFoundError("unknown dataset '" + id + "'");
            auto samples = dataset(id);
            const auto cursor = size_param(req, "cursor", 0);
            const auto limit = std::max<std::size_t>(1, size_param(req, "limit", config.page_size));
            Json page = Json::array();
            for (std::size_t i = cursor; i < samples->size() && i < cursor + limit; ++i) {
                Json s = to_json((*samples)[i]);
                s["normalized_input"] = normalize_input((*samples)[i]).paragraph;
                page.push_back(std::move(s));
            }
            const auto next = cursor + limit;
            send_json(res, {{"dataset_id", id},
                            {"samples", page},
                            {"next_cursor", next < samples->size() ? Json(std::to_string(next)) : Json(nullptr)}});
        }));

        server.Get("/annotation/queue", guarded([this](const auto& req, auto& res) { queue(req, res); }));
        server.Post("/annotation/labels", guarded([this](const auto& req, auto& res) { post_label(req, res); }));
        server.Get("/annotation/labels", guarded([this](const auto& req, auto& res) {
            const auto id = dataset_param(req);
            Json entries = Json::array();
            for (const auto& e : ledger(id).entries()) entries.push_back(to_json(e));
            send_json(res, {{"dataset_id", id}, {"entries", entries}});
        }));
        server.Get("/annotation/conflicts", guarded([this](const auto& req, auto& res) {
            const auto id = dataset_param(req);
            auto state = ledger(id).resolved();
            Json conflicts = Json::array();
            for (const auto& key : state.conflicts) {
                Json labels = Json::array();
                for (const auto& [annotator, l] : state.latest.at(key)) labels.push_back(to_json(l));
                conflicts.push_back({{"item", to_json(key)}, {"labels", labels}});
            }
            send_json(res, {{"dataset_id", id}, {"conflicts", conflicts}, {"incomplete", state.incomplete.size()}});
        }));
        server.Post("/annotation/arbitrations",
                    guarded([this](const auto& req, auto& res) { post_arbitration(req, res); }));
        server.Get("/annotation/final", guarded([this](const auto& req, auto& res) {
            const auto id = dataset_param(req);
            Json labels = Json::array();
            for (const auto& l : ledger(id).final_labels()) labels.push_back(to_json(l));
            send_json(res, {{"dataset_id", id}, {"labels", labels}});
        }));

        server.Post("/runs", guarded([this](const auto& req, auto& res) { post_run(req, res); }));
        server.Get("/runs", guarded([this](const auto&, auto& res) {
            std::set<std::string> ids;
            for (const auto& id : store.run_ids()) ids.insert(id);
            {
                std::lock_guard lock(mutex);
                for (const auto& [id, state] : runs) ids.insert(id);
            }
            send_json(res, {{"runs", std::vector<std::string>(ids.begin(), ids.end())}});
        }));
        server.Get(R"(/runs/([^/]+))", guarded([this](const httplib::Request& req, auto& res) {
            send_json(res, run_status(req.matches[1]));
        }));
        server.Get(R"(/runs/([^/]+)/report)", guarded([this](const httplib::Request& req, auto& res) {
            const auto format = parse_report_format(param(req, "format").value_or("md"));
            if (!format) throw ValidationError("format must be md or csv");
            auto run = load_run(store.run_dir(req.matches[1]));
            auto data = run_report_data(run);
            res.set_content(render_report(data, *format),
                            *format == ReportFormat::kCsv ? "text/csv" : "text/markdown");
        }));
        server.Get(R"(/runs/([^/]+)/agreement)", guarded([this](const httplib::Request& req, auto& res) {
            auto run = load_run(store.run_dir(req.matches[1]));
            auto labels = run_final_labels(run);
            if (!labels) throw NotFoundError("run dataset has no annotation ledger");
            send_json(res, to_json(agreement_report(run, *labels)));
        }));
    }

    // -- annotation ----------------------------------------------------------

    void queue(const httplib::Request& req, httplib::Response& res) {
        auto annotator = token_annotator(req);
        if (!annotator) annotator = param(req, "annotator");
        if (!annotator || annotator->empty()) throw ValidationError("query parameter 'annotator' is required");
        const auto id = dataset_param(req);
        const auto limit = std::max<std::size_t>(1, size_param(req, "limit", config.queue_size));
        auto samples = dataset(id);

        std::lock_guard lock(mutex);
        auto state = ledger_locked(id).resolved();
        auto& held = reservations[id];
        const auto now = Monotonic::now();
        for (auto it = held.begin(); it != held.end();) {
            std::erase_if(it->second, [&](const auto& kv) { return kv.second <= now; });
            it = it->second.empty() ? held.erase(it) : std::next(it);
        }

        Json items = Json::array();
        for (const auto& sample : *samples) {
            for (const auto& key : annotation_targets(sample)) {
                if (items.size() >= limit) break;
                if (state.final_labels.count(key)) continue;
                std::set<std::string> involved;
                if (auto l = state.latest.find(key); l != state.latest.end()) {
                    for (const auto& [who, label] : l->second) involved.insert(who);
                }
                if (involved.count(*annotator)) continue;
                auto& holders = held[key];
                if (!holders.count(*annotator)) {
                    for (const auto& [who, expiry] : holders) involved.insert(who);
                    if (static_cast<int>(involved.size()) >= config.annotators_per_item) {
                        if (holders.empty()) held.erase(key);
                        continue;
                    }
                }
                holders[*annotator] = now + config.reservation_ttl;
                items.push_back(item_json(sample, key));
            }
        }
        send_json(res, {{"dataset_id", id}, {"annotator_id", *annotator}, {"items", items}});
    }

    void post_label(const httplib::Request& req, httplib::Response& res) {
        const auto id = dataset_param(req);
        auto label = label_from_request(req);
        auto samples = dataset(id);
        validate_label(label, find_sample(*samples, label.sample_id), evaluation);
        const auto seq = ledger(id).append_label(label, header(req, "Idempotency-Key"));
        {
            std::lock_guard lock(mutex);
            auto& held = reservations[id];
            if (auto it = held.find(label.key()); it != held.end()) {
                it->second.erase(label.annotator_id);
                if (it->second.empty()) held.erase(it);
            }
        }
        send_json(res, {{"seq", seq}}, 201);
    }

    void post_arbitration(const httplib::Request& req, httplib::Response& res) {
        const auto id = dataset_param(req);
        auto label = label_from_request(req);
        auto samples = dataset(id);
        validate_label(label, find_sample(*samples, label.sample_id), evaluation);
        const auto seq = ledger(id).append_arbitration(label, header(req, "Idempotency-Key"));
        send_json(res, {{"seq", seq}}, 201);
    }

    // -- runs ------------------------------------------------------------------

    std::optional<std::vector<HumanLabel>> run_final_labels(const RunRecord& run) {
        const auto& ref = run.spec.dataset_ref;
        bool is_id = true;
        try {
            check_identifier(ref, "dataset id");
        } catch (const ValidationError&) {
            is_id = false;
        }
        if (!is_id || !fs::exists(store.ledger_path(ref))) return std::nullopt;
        return ledger(ref).final_labels();
    }

    ReportData run_report_data(const RunRecord& run) {
        auto samples = resolve_dataset(store, run.spec.dataset_ref, evaluation.tasks);
        auto labels = run_final_labels(run);
        return report_data(run, samples, labels ? &*labels : nullptr);
    }

    void post_run(const httplib::Request& req, httplib::Response& res) {
        auto spec = RunSpec::from_json(parse_body(req));
        const bool force = param(req, "force").value_or("false") == "true";
        // Fail fast on refs; the run itself happens in the background.
        resolve_dataset(store, spec.dataset_ref, evaluation.tasks);
        if (spec.model_config_ref.empty()) throw ValidationError("run spec: model_config_ref is required");
        ModelConfig::load(spec.model_config_ref);
        {
            std::lock_guard lock(mutex);
            auto existing = runs.find(spec.run_id);
            const bool active = existing != runs.end() &&
                                (existing->second.status == "queued" || existing->second.status == "running");
            if (active || (!force && (existing != runs.end() || fs::exists(store.run_dir(spec.run_id))))) {
                throw ConflictError("run '" + spec.run_id + "' already exists");
            }
            runs[spec.run_id] = RunState{};
            run_threads.emplace_back([this, spec, force] { execute(spec, force); });
        }
        send_json(res, {{"run_id", spec.run_id}, {"status", "queued"}}, 202);
    }

    void execute(const RunSpec& spec, bool force) {
        {
            std::lock_guard lock(mutex);
            runs[spec.run_id].status = "running";
        }
        try {
            auto record = execute_run(store, spec, evaluation, templates, force, [&](std::size_t done, std::size_t total) {
                std::lock_guard lock(mutex);
                auto& s = runs[spec.run_id];
                s.done = done;
                s.total = total;
            });
            std::lock_guard lock(mutex);
            auto& s = runs[spec.run_id];
            s.status = "completed";
            s.counts = record.counts();
        } catch (const std::exception& e) {
            spdlog::error("run {} failed: {}", spec.run_id, e.what());
            std::lock_guard lock(mutex);
            auto& s = runs[spec.run_id];
            s.status = "failed";
            s.error = e.what();
        }
    }

    Json run_status(const std::string& run_id) {
        {
            std::lock_guard lock(mutex);
            if (auto it = runs.find(run_id); it != runs.end()) {
                const auto& s = it->second;
                Json out = {{"run_id", run_id}, {"status", s.status}, {"done", s.done}, {"total", s.total}};
                if (!s.error.empty()) out["error"] = s.error;
                if (s.counts) out["counts"] = counts_json(*s.counts);
                return out;
            }
        }
        auto dir = store.run_dir(run_id);
        if (!fs::exists(dir / "manifest.json")) throw NotFoundError("unknown run '" + run_id + "'");
        Json manifest = Json::parse(read_file(dir / "manifest.json"), nullptr, false);
        if (manifest.is_discarded()) throw StorageError("malformed manifest for run '" + run_id + "'");
        return {{"run_id", run_id}, {"status", "completed"}, {"counts", manifest.value("counts", Json::object())}};
    }
};

Service::Service(ServiceConfig config, EvaluationConfig evaluation, TemplateRegistry templates)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(evaluation), std::move(templates))) {}

Service::~Service() {
    stop();
    wait_for_runs();
}

int Service::bind() {
    auto& s = *impl_;
    if (s.config.port == 0) {
        s.port = s.server.bind_to_any_port(s.config.host);
    } else if (s.server.bind_to_port(s.config.host, s.config.port)) {
        s.port = s.config.port;
    } else {
        s.port = -1;
    }
    if (s.port <= 0) {
        throw StorageError("cannot bind " + s.config.host + ":" + std::to_string(s.config.port));
    }
    return s.port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

int Service::start() {
    const int port = bind();
    impl_->listener = std::thread([this] { listen(); });
    impl_->server.wait_until_ready();
    return port;
}

void Service::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
}

void Service::wait_for_runs() {
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(impl_->mutex);
        threads.swap(impl_->run_threads);
    }
    for (auto& t : threads) t.join();
}

}  // namespace agenteval
