#include "agenteval/backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "agenteval/digest.hpp"
#include "agenteval/records.hpp"

namespace agenteval {

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;
};

std::optional<ParsedUrl> parse_url(const std::string& url) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch match;
    if (!std::regex_match(url, match, kUrl)) return std::nullopt;
    return ParsedUrl{match[1].str(), match[2].matched ? match[2].str() : "/"};
}

}  // namespace

void ModelConfig::validate() const {
    if (model_id.empty()) throw ValidationError("model config: model_id must not be empty");
    if (timeout_ms <= 0) throw ValidationError("model config: timeout_ms must be positive");
    if (max_retries < 0 || max_retries > 20) {
        throw ValidationError("model config: max_retries must be within 0..20");
    }
    if (max_output_tokens <= 0) throw ValidationError("model config: max_output_tokens must be positive");
    if (!(temperature >= 0.0)) throw ValidationError("model config: temperature must be >= 0");
    if (backoff_initial_ms < 0 || backoff_max_ms < backoff_initial_ms) {
        throw ValidationError("model config: invalid backoff bounds");
    }
    if (!is_scripted() && !parse_url(endpoint)) {
        throw ValidationError("model config: endpoint must be an http(s) URL or \"scripted\"");
    }
}

ModelConfig ModelConfig::from_json(const Json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ValidationError("model config must be a JSON object");
    ModelConfig c;
    try {
        c.model_id = doc.at("model_id").get<std::string>();
        c.endpoint = doc.value("endpoint", c.endpoint);
        c.temperature = doc.value("temperature", c.temperature);
        c.max_output_tokens = doc.value("max_output_tokens", c.max_output_tokens);
        c.timeout_ms = doc.value("timeout_ms", c.timeout_ms);
        c.max_retries = doc.value("max_retries", c.max_retries);
        c.backoff_initial_ms = doc.value("backoff_initial_ms", c.backoff_initial_ms);
        c.backoff_max_ms = doc.value("backoff_max_ms", c.backoff_max_ms);
        c.rate_limit_per_second = doc.value("rate_limit_per_second", c.rate_limit_per_second);
        c.api_key = doc.value("api_key", std::string());
        c.trace = doc.value("trace", false);
        if (doc.contains("script")) {
            std::filesystem::path script = doc.at("script").get<std::string>();
            c.script_path = (script.is_relative() && !base_dir.empty() ? base_dir / script : script).string();
        }
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("model config: ") + e.what());
    }
    if (const char* key = std::getenv(kApiKeyEnv); key && *key) c.api_key = key;
    c.validate();
    return c;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open model config '" + path.string() + "'");
    Json doc = Json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ValidationError("model config '" + path.string() + "' is not JSON");
    return from_json(doc, path.parent_path());
}

Json to_json(const CompletionRecord& record) {
    return {{"prompt_hash", record.prompt_hash},
            {"raw_output", record.raw_output},
            {"latency_ms", record.latency_ms},
            {"attempt_count", record.attempt_count},
            {"model_id", record.model_id}};
}

std::string_view to_string(BackendErrorKind kind) {
    switch (kind) {
        case BackendErrorKind::kTimeout: return "timeout";
        case BackendErrorKind::kTimeoutExhausted: return "timeout_exhausted";
        case BackendErrorKind::kHttpStatus: return "http_status";
        case BackendErrorKind::kConnection: return "connection";
        case BackendErrorKind::kScriptedMiss: return "scripted_miss";
        case BackendErrorKind::kProtocol: return "protocol";
        case BackendErrorKind::kConfiguration: return "configuration";
    }
    return "?";
}

bool BackendError::transient() const {
    switch (kind_) {
        case BackendErrorKind::kTimeout:
        case BackendErrorKind::kConnection:
            return true;
        case BackendErrorKind::kHttpStatus:
            return http_status_ == 429 || http_status_ >= 500;
        default:
            return false;
    }
}

std::string prompt_hash(const PromptText& prompt) { return sha256_hex(prompt.body); }

// ---------------------------------------------------------------------------

std::string ScriptedTransport::send(const PromptText& prompt, const ModelConfig&) {
    auto hash = prompt_hash(prompt);
    auto it = fixtures_.find(hash);
    if (it == fixtures_.end()) {
        throw BackendError(BackendErrorKind::kScriptedMiss,
                           "no scripted output for prompt hash " + hash);
    }
    return it->second;
}

ScriptFixtures load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open script '" + path.string() + "'");
    ScriptFixtures fixtures;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json doc = Json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("prompt_hash") ||
            !doc["prompt_hash"].is_string() || !doc.contains("raw_output") ||
            !doc["raw_output"].is_string()) {
            throw ValidationError(path.string() + ": line " + std::to_string(line_number) +
                                  ": expected {\"prompt_hash\", \"raw_output\"}");
        }
        fixtures.insert_or_assign(doc["prompt_hash"].get<std::string>(),
                                  doc["raw_output"].get<std::string>());
    }
    return fixtures;
}

void write_script(std::ostream& out, const ScriptFixtures& fixtures) {
    for (const auto& [hash, raw] : fixtures) {
        out << to_line({{"prompt_hash", hash}, {"raw_output", raw}}) << '\n';
    }
}

Json chat_completion_request(const PromptText& prompt, const ModelConfig& config) {
    return {{"model", config.model_id},
            {"messages", Json::array({{{"role", "user"}, {"content", prompt.body}}})},
            {"temperature", config.temperature},
            {"max_tokens", config.max_output_tokens},
            {"stream", false}};
}

std::string chat_completion_content(const std::string& response_body) {
    Json doc = Json::parse(response_body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw BackendError(BackendErrorKind::kProtocol, "response body is not a JSON object");
    }
    auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) {
        throw BackendError(BackendErrorKind::kProtocol, "response has no choices");
    }
    const Json& first = (*choices)[0];
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object() ||
        !first["message"].contains("content") || !first["message"]["content"].is_string()) {
        throw BackendError(BackendErrorKind::kProtocol, "response choice has no message content");
    }
    return first["message"]["content"].get<std::string>();
}

std::string HttpTransport::send(const PromptText& prompt, const ModelConfig& config) {
    auto url = parse_url(config.endpoint);
    if (!url) throw BackendError(BackendErrorKind::kConfiguration, "bad endpoint URL");

    httplib::Client client(url->scheme_host_port);
    const auto timeout = std::chrono::milliseconds(config.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);
    const auto body = chat_completion_request(prompt, config).dump();
    if (config.trace) {
        spdlog::info("trace request POST {}{} Authorization: {} body: {}", url->scheme_host_port,
                     url->path, config.api_key.empty() ? "<none>" : "Bearer <redacted>", body);
    }

    const auto started = std::chrono::steady_clock::now();
    auto result = client.Post(url->path, headers, body, "application/json");
    if (!result) {
        const auto elapsed = std::chrono::steady_clock::now() - started;
        const auto error = result.error();
        const bool timed_out = error == httplib::Error::ConnectionTimeout ||
                               ((error == httplib::Error::Read || error == httplib::Error::Write) &&
                                elapsed >= timeout * 9 / 10);
        if (timed_out) {
            throw BackendError(BackendErrorKind::kTimeout,
                               "request timed out after " + std::to_string(config.timeout_ms) + " ms");
        }
        throw BackendError(BackendErrorKind::kConnection,
                           "connection error: " + httplib::to_string(error));
    }
    if (config.trace) spdlog::info("trace response {} body: {}", result->status, result->body);
    if (result->status < 200 || result->status >= 300) {
        throw BackendError(BackendErrorKind::kHttpStatus,
                           "HTTP status " + std::to_string(result->status), result->status);
    }
    return chat_completion_content(result->body);
}

// ---------------------------------------------------------------------------

Backend::Backend(ModelConfig config, std::shared_ptr<Transport> transport,
                 std::shared_ptr<Clock> clock)
    : config_(std::move(config)), transport_(std::move(transport)), clock_(std::move(clock)) {
    if (!transport_) throw BackendError(BackendErrorKind::kConfiguration, "backend needs a transport");
    if (config_.rate_limit_per_second > 0) {
        limiter_ = std::make_unique<RateLimiter>(config_.rate_limit_per_second, *clock_);
    }
}

CompletionRecord Backend::complete(const PromptText& prompt) {
    CompletionRecord record;
    record.prompt_hash = prompt_hash(prompt);
    record.model_id = config_.model_id;

    const auto started = clock_->now();
    auto delay = std::chrono::milliseconds(config_.backoff_initial_ms);
    const auto max_delay = std::chrono::milliseconds(config_.backoff_max_ms);
    for (int attempt = 1;; ++attempt) {
        record.attempt_count = attempt;
        if (limiter_) limiter_->acquire();
        try {
            record.raw_output = transport_->send(prompt, config_);
            break;
        } catch (const BackendError& e) {
            if (!e.transient()) throw;
            if (attempt > config_.max_retries) {
                if (e.kind() == BackendErrorKind::kTimeout) {
                    throw BackendError(BackendErrorKind::kTimeoutExhausted,
                                       "timed out after " + std::to_string(attempt) + " attempt(s)");
                }
                throw BackendError(e.kind(),
                                   std::string(e.what()) + " (after " + std::to_string(attempt) +
                                       " attempt(s))",
                                   e.http_status());
            }
            spdlog::debug("attempt {} failed ({}); retrying in {} ms", attempt, e.what(),
                          delay.count());
            clock_->sleep_for(delay);
            delay = std::min(delay * 2, max_delay);
        }
    }
    record.latency_ms =
        std::chrono::duration<double, std::milli>(clock_->now() - started).count();
    return record;
}

std::unique_ptr<Backend> script_backend(ScriptFixtures fixtures, ModelConfig config) {
    if (config.model_id.empty()) config.model_id = "scripted";
    config.endpoint = kScriptedEndpoint;
    return std::make_unique<Backend>(std::move(config),
                                     std::make_shared<ScriptedTransport>(std::move(fixtures)));
}

std::unique_ptr<Backend> make_backend(const ModelConfig& config) {
    try {
        config.validate();
    } catch (const ValidationError& e) {
        throw BackendError(BackendErrorKind::kConfiguration, e.what());
    }
    if (config.is_scripted()) {
        if (config.script_path.empty()) {
            throw BackendError(BackendErrorKind::kConfiguration,
                               "scripted model config needs a \"script\" file");
        }
        return script_backend(load_script(config.script_path), config);
    }
    return std::make_unique<Backend>(config, std::make_shared<HttpTransport>());
}

}  // namespace agenteval
