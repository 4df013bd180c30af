#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "agenteval/clock.hpp"
#include "agenteval/errors.hpp"
#include "agenteval/prompts.hpp"
#include "agenteval/rate_limiter.hpp"

namespace agenteval {

inline constexpr const char* kScriptedEndpoint = "scripted";
inline constexpr const char* kApiKeyEnv = "AGENTEVAL_API_KEY";

struct ModelConfig {
    std::string model_id;
    std::string endpoint = kScriptedEndpoint;  // chat-completions URL or "scripted"
    double temperature = 0.0;
    int max_output_tokens = 1024;
    int timeout_ms = 60000;
    int max_retries = 3;
    int backoff_initial_ms = 500;
    int backoff_max_ms = 30000;
    unsigned rate_limit_per_second = 0;  // 0 disables limiting
    std::string api_key;
    std::string script_path;  // scripted fixtures, relative to the config file
    bool trace = false;

    bool is_scripted() const { return endpoint == kScriptedEndpoint; }
    // Throws ValidationError.
    void validate() const;

    // Reads a JSON config file. Relative script paths resolve against the
    // file's directory; AGENTEVAL_API_KEY overrides `api_key`.
    static ModelConfig from_json(const Json& doc, const std::filesystem::path& base_dir = {});
    static ModelConfig load(const std::filesystem::path& path);
};

struct CompletionRecord {
    std::string prompt_hash;
    std::string raw_output;
    double latency_ms = 0.0;
    int attempt_count = 0;
    std::string model_id;
};

Json to_json(const CompletionRecord& record);

enum class BackendErrorKind {
    kTimeout,           // one attempt timed out (transient)
    kTimeoutExhausted,  // retries used up on timeouts
    kHttpStatus,
    kConnection,
    kScriptedMiss,
    kProtocol,  // malformed response body
    kConfiguration,
};

std::string_view to_string(BackendErrorKind kind);

class BackendError : public Error {
public:
    BackendError(BackendErrorKind kind, const std::string& message, int http_status = 0)
        : Error(ErrorCode::kBackend, message), kind_(kind), http_status_(http_status) {}

    BackendErrorKind kind() const { return kind_; }
    int http_status() const { return http_status_; }
    // Timeouts, connection failures, 429 and 5xx are retried.
    bool transient() const;

private:
    BackendErrorKind kind_;
    int http_status_;
};

// Prompt hash used to key scripted fixtures: SHA-256 of the rendered body.
std::string prompt_hash(const PromptText& prompt);

// One request/response exchange, no retries. Throws BackendError.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string send(const PromptText& prompt, const ModelConfig& config) = 0;
};

using ScriptFixtures = std::map<std::string, std::string>;  // prompt_hash -> raw output

// Immutable lookup table; an unknown hash is a kScriptedMiss naming the hash.
class ScriptedTransport final : public Transport {
public:
    explicit ScriptedTransport(ScriptFixtures fixtures) : fixtures_(std::move(fixtures)) {}
    std::string send(const PromptText& prompt, const ModelConfig& config) override;

private:
    const ScriptFixtures fixtures_;
};

// Reads `{"prompt_hash": ..., "raw_output": ...}` JSONL.
ScriptFixtures load_script(const std::filesystem::path& path);
void write_script(std::ostream& out, const ScriptFixtures& fixtures);

// OpenAI-style chat-completions client.
class HttpTransport final : public Transport {
public:
    std::string send(const PromptText& prompt, const ModelConfig& config) override;
};

// Request body sent by HttpTransport.
Json chat_completion_request(const PromptText& prompt, const ModelConfig& config);
// Extracts choices[0].message.content; throws BackendError(kProtocol).
std::string chat_completion_content(const std::string& response_body);

// Retrying, rate-limited completion endpoint shared by all workers.
class Backend {
public:
    Backend(ModelConfig config, std::shared_ptr<Transport> transport,
            std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());

    // Retries transient failures with exponential backoff, up to
    // config.max_retries extra attempts. Throws BackendError.
    CompletionRecord complete(const PromptText& prompt);

    const ModelConfig& config() const { return config_; }

private:
    ModelConfig config_;
    std::shared_ptr<Transport> transport_;
    std::shared_ptr<Clock> clock_;
    std::unique_ptr<RateLimiter> limiter_;
};

std::unique_ptr<Backend> script_backend(ScriptFixtures fixtures, ModelConfig config = {});

// Scripted or HTTP backend per config.endpoint. Throws BackendError
// (kConfiguration) or NotFoundError for a missing script file.
std::unique_ptr<Backend> make_backend(const ModelConfig& config);

}  // namespace agenteval
