#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "agenteval/core.hpp"
#include "agenteval/prompts.hpp"

namespace agenteval {

struct ServiceConfig {
    std::filesystem::path store_root = "store";
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    int annotators_per_item = 2;
    // Bearer token -> annotator_id. Empty: annotator ids are taken from
    // requests as given.
    std::map<std::string, std::string> tokens;
    // How long a queue item handed to an annotator stays reserved for them.
    std::chrono::milliseconds reservation_ttl{std::chrono::minutes(15)};
    std::size_t page_size = 50;
    std::size_t queue_size = 10;

    // Keys: store, host, port, annotators_per_item, tokens,
    // reservation_ttl_seconds, page_size, queue_size. PORT and
    // AGENTEVAL_STORE environment variables override port and store.
    static ServiceConfig from_json(const Json& doc);
};

// HTTP+JSON API over a store. Every non-2xx response body is
//   {"error": {"code": "not_found"|"conflict"|"validation"|"internal",
//              "message": ..., "detail": ...}}
class Service {
public:
    Service(ServiceConfig config, EvaluationConfig evaluation, TemplateRegistry templates);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds the listening socket and returns the bound port.
    int bind();
    // Serves until stop(); call bind() first.
    void listen();
    // bind() plus listen() on a background thread.
    int start();
    void stop();
    // Waits for background runs to finish.
    void wait_for_runs();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace agenteval
