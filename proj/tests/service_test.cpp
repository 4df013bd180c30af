#include <gtest/gtest.h>

#include <thread>

#include <httplib.h>

#include "agenteval/service.hpp"
#include "test_util.hpp"

using namespace agenteval;
using namespace agenteval::testing;
using namespace std::chrono_literals;

namespace {

class ServiceFixture : public ::testing::Test {
protected:
    void SetUp() override { start({}); }

    void start(std::map<std::string, std::string> tokens, std::chrono::milliseconds ttl = std::chrono::minutes(15)) {
        client.reset();
        service.reset();
        ServiceConfig config;
        config.store_root = dir.path();
        config.port = 0;
        config.tokens = std::move(tokens);
        config.reservation_ttl = ttl;
        service = std::make_unique<Service>(config, EvaluationConfig{}, TemplateRegistry::defaults());
        port = service->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }

    httplib::Result post(const std::string& path, const Json& body, httplib::Headers headers = {}) {
        return client->Post(path, headers, body.dump(), "application/json");
    }

    void ingest_demo() {
        auto r = client->Post("/datasets/demo", slurp(fixture("demo.jsonl")), "application/x-ndjson");
        ASSERT_TRUE(r);
        ASSERT_EQ(r->status, 201) << r->body;
    }

    Json json(const httplib::Result& r) {
        EXPECT_TRUE(r);
        return Json::parse(r->body);
    }

    static Json satisfaction(const std::string& sample, const std::string& system, const std::string& level,
                             const std::string& annotator) {
        Json causes = Json::array();
        if (level == "unsatisfied" || level == "highly_unsatisfied") causes.push_back("verbose");
        return {{"format_version", 1},
                {"sample_id", sample},
                {"stage", 3},
                {"target", system},
                {"payload", {{"satisfaction", level}, {"causes", causes}, {"explanation", "x"}}},
                {"annotator_id", annotator}};
    }

    // Every non-2xx body must be an ApiError.
    static void expect_api_error(const httplib::Result& r, int status, const std::string& code) {
        ASSERT_TRUE(r);
        EXPECT_EQ(r->status, status) << r->body;
        auto doc = Json::parse(r->body, nullptr, false);
        ASSERT_TRUE(doc.is_object()) << r->body;
        ASSERT_TRUE(doc.contains("error")) << r->body;
        EXPECT_EQ(doc["error"]["code"], code) << r->body;
        EXPECT_TRUE(doc["error"]["message"].is_string());
    }

    TempDir dir;
    std::unique_ptr<Service> service;
    std::unique_ptr<httplib::Client> client;
    int port = 0;
};

}  // namespace

TEST_F(ServiceFixture, HealthAndDatasets) {
    EXPECT_EQ(json(client->Get("/health"))["status"], "ok");
    ingest_demo();
    EXPECT_EQ(json(client->Get("/datasets"))["datasets"], Json::array({"demo"}));

    auto page = json(client->Get("/datasets/demo/samples?limit=8"));
    EXPECT_EQ(page["samples"].size(), 8u);
    EXPECT_EQ(page["next_cursor"], "8");
    EXPECT_TRUE(page["samples"][0].contains("normalized_input"));
    auto last = json(client->Get("/datasets/demo/samples?cursor=16&limit=8"));
    EXPECT_EQ(last["samples"].size(), 4u);
    EXPECT_TRUE(last["next_cursor"].is_null());
}

TEST_F(ServiceFixture, LenientIngestReportsSkippedLines) {
    auto r = client->Post("/datasets/mixed?mode=lenient", slurp(fixture("mixed.jsonl")), "application/x-ndjson");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 201);
    auto doc = Json::parse(r->body);
    EXPECT_EQ(doc["samples"], 17);
    EXPECT_EQ(doc["rejected"], 3);
    EXPECT_EQ(doc["skipped"][0]["line"], 6);
    expect_api_error(client->Post("/datasets/strict?mode=strict", slurp(fixture("mixed.jsonl")), "application/x-ndjson"),
                     400, "validation");
}

TEST_F(ServiceFixture, ErrorsCarryAnApiError) {
    expect_api_error(client->Get("/no/such/route"), 404, "not_found");
    expect_api_error(client->Get("/datasets/ghost/samples"), 404, "not_found");
    expect_api_error(client->Get("/runs/ghost"), 404, "not_found");
    expect_api_error(client->Get("/runs/ghost/report"), 404, "not_found");
    ingest_demo();
    expect_api_error(client->Post("/annotation/labels", "{not json", "application/json"), 400, "validation");
    expect_api_error(client->Get("/annotation/queue"), 400, "validation");
    // Same id, different content.
    auto changed = slurp(fixture("demo.jsonl"));
    changed.replace(changed.find("atlas"), 5, "aTlas");
    expect_api_error(client->Post("/datasets/demo", changed, "application/x-ndjson"), 409, "conflict");
}

TEST_F(ServiceFixture, UnknownSampleIsAValidationError) {
    ingest_demo();
    expect_api_error(post("/annotation/labels", satisfaction("demo-999", "atlas", "satisfied", "ann-1")), 400,
                     "validation");
    expect_api_error(post("/annotation/labels", satisfaction("demo-001", "nobody", "satisfied", "ann-1")), 400,
                     "validation");
}

TEST_F(ServiceFixture, DisagreementShowsUpAsAConflictAndArbitrationResolvesIt) {
    ingest_demo();
    EXPECT_EQ(post("/annotation/labels", satisfaction("demo-001", "atlas", "satisfied", "ann-1"))->status, 201);
    EXPECT_EQ(post("/annotation/labels", satisfaction("demo-001", "atlas", "unsatisfied", "ann-2"))->status, 201);
    EXPECT_EQ(post("/annotation/labels", satisfaction("demo-001", "boreal", "satisfied", "ann-1"))->status, 201);
    EXPECT_EQ(post("/annotation/labels", satisfaction("demo-001", "boreal", "satisfied", "ann-2"))->status, 201);

    auto conflicts = json(client->Get("/annotation/conflicts"));
    ASSERT_EQ(conflicts["conflicts"].size(), 1u);
    EXPECT_EQ(conflicts["conflicts"][0]["item"]["target"], "atlas");
    EXPECT_EQ(conflicts["conflicts"][0]["labels"].size(), 2u);
    EXPECT_EQ(json(client->Get("/annotation/final"))["labels"].size(), 1u);

    auto arb = satisfaction("demo-001", "atlas", "satisfied", "lead");
    EXPECT_EQ(post("/annotation/arbitrations", arb)->status, 201);
    expect_api_error(post("/annotation/arbitrations", arb), 409, "conflict");
    expect_api_error(post("/annotation/arbitrations", satisfaction("demo-001", "cobalt", "satisfied", "lead")), 400,
                     "validation");
    EXPECT_TRUE(json(client->Get("/annotation/conflicts"))["conflicts"].empty());

    int finals_for_atlas = 0;
    const auto finals = json(client->Get("/annotation/final"));
    for (const auto& l : finals["labels"]) {
        EXPECT_TRUE(l["is_final"].get<bool>());
        if (l["target"] == "atlas") ++finals_for_atlas;
    }
    EXPECT_EQ(finals_for_atlas, 1);
}

TEST_F(ServiceFixture, IdempotencyKeysReplay) {
    ingest_demo();
    httplib::Headers key{{"Idempotency-Key", "abc-1"}};
    auto first = json(post("/annotation/labels", satisfaction("demo-002", "atlas", "satisfied", "ann-1"), key));
    auto again = json(post("/annotation/labels", satisfaction("demo-002", "atlas", "satisfied", "ann-1"), key));
    EXPECT_EQ(first["seq"], again["seq"]);
    EXPECT_EQ(json(client->Get("/annotation/labels"))["entries"].size(), 1u);
    expect_api_error(post("/annotation/labels", satisfaction("demo-002", "atlas", "unsatisfied", "ann-1"), key), 409,
                     "conflict");
}

TEST_F(ServiceFixture, QueueGivesEachItemToAtMostTwoAnnotators) {
    ingest_demo();
    auto items_of = [&](const std::string& who) {
        std::vector<std::string> out;
        const auto queue = json(client->Get("/annotation/queue?annotator=" + who + "&limit=5"));
        for (const auto& i : queue["items"]) {
            out.push_back(i["item"].dump());
        }
        return out;
    };
    auto a = items_of("ann-a");
    auto b = items_of("ann-b");
    auto c = items_of("ann-c");
    ASSERT_EQ(a.size(), 5u);
    EXPECT_EQ(a, b);
    for (const auto& item : c) EXPECT_EQ(std::count(a.begin(), a.end(), item), 0) << item;
    // Asking again returns the caller's own reservations.
    EXPECT_EQ(items_of("ann-a"), a);

    auto queue = json(client->Get("/annotation/queue?annotator=ann-a&limit=9"));
    const auto& first = queue["items"][0];
    EXPECT_EQ(first["agent"], "interaction");
    EXPECT_EQ(first["dimension_names"].size(), 3u);
    EXPECT_TRUE(first.contains("paragraph"));
    for (const auto& i : queue["items"]) {
        if (i["agent"] == "experience_single") {
            EXPECT_FALSE(i.contains("paragraph"));
        }
    }
}

TEST_F(ServiceFixture, LabeledItemsLeaveTheQueue) {
    ingest_demo();
    auto queue = json(client->Get("/annotation/queue?annotator=ann-a&limit=1"));
    const auto item = queue["items"][0]["item"];
    ASSERT_EQ(item["stage"], 1);
    Json label = {{"format_version", 1},
                  {"sample_id", item["sample_id"]},
                  {"stage", 1},
                  {"target", item["target"]},
                  {"payload", {{"level", 2}, {"rationale", ""}}},
                  {"annotator_id", "ann-a"}};
    ASSERT_EQ(post("/annotation/labels", label)->status, 201);
    auto next = json(client->Get("/annotation/queue?annotator=ann-a&limit=1"));
    EXPECT_NE(next["items"][0]["item"], item);
    // ann-b still sees it: one more label is needed.
    EXPECT_EQ(json(client->Get("/annotation/queue?annotator=ann-b&limit=1"))["items"][0]["item"], item);
}

TEST_F(ServiceFixture, ExpiredReservationsAreReleased) {
    start({}, 50ms);
    ingest_demo();
    auto first = json(client->Get("/annotation/queue?annotator=ann-a&limit=1"))["items"][0]["item"];
    json(client->Get("/annotation/queue?annotator=ann-b&limit=1"));
    EXPECT_NE(json(client->Get("/annotation/queue?annotator=ann-c&limit=1"))["items"][0]["item"], first);
    std::this_thread::sleep_for(120ms);
    EXPECT_EQ(json(client->Get("/annotation/queue?annotator=ann-c&limit=1"))["items"][0]["item"], first);
}

TEST_F(ServiceFixture, BearerTokensIdentifyAnnotators) {
    start({{"tok-1", "ann-1"}});
    ingest_demo();
    expect_api_error(client->Get("/annotation/queue"), 401, "validation");
    httplib::Headers auth{{"Authorization", "Bearer tok-1"}};
    EXPECT_EQ(json(client->Get("/annotation/queue", auth))["annotator_id"], "ann-1");
    auto label = satisfaction("demo-003", "atlas", "satisfied", "ann-1");
    label.erase("annotator_id");
    EXPECT_EQ(post("/annotation/labels", label, auth)->status, 201);
    EXPECT_EQ(json(client->Get("/annotation/labels"))["entries"][0]["label"]["annotator_id"], "ann-1");
    expect_api_error(post("/annotation/labels", satisfaction("demo-003", "boreal", "satisfied", "ann-9"), auth), 403,
                     "validation");
    expect_api_error(post("/annotation/labels", label, {{"Authorization", "Bearer wrong"}}), 401, "validation");
}

TEST_F(ServiceFixture, StageOneRunReportsOnlyStageOne) {
    ingest_demo();
    auto spec = to_json(demo_spec());
    spec["run_id"] = "only-1";
    spec["dataset_ref"] = "demo";
    spec["stages_enabled"] = {1};
    auto accepted = post("/runs", spec);
    ASSERT_TRUE(accepted);
    ASSERT_EQ(accepted->status, 202) << accepted->body;

    Json status;
    for (int i = 0; i < 200; ++i) {
        status = json(client->Get("/runs/only-1"));
        if (status["status"] == "completed" || status["status"] == "failed") break;
        std::this_thread::sleep_for(25ms);
    }
    ASSERT_EQ(status["status"], "completed") << status.dump();
    EXPECT_EQ(status["counts"]["stage1"], 60);
    EXPECT_EQ(status["counts"]["stage2"], 0);
    expect_api_error(post("/runs", spec), 409, "conflict");

    auto report = client->Get("/runs/only-1/report");
    ASSERT_EQ(report->status, 200);
    EXPECT_NE(report->body.find("## Average scores by first-order dimension"), std::string::npos);
    EXPECT_EQ(report->body.find("Satisfaction"), std::string::npos);
    EXPECT_EQ(report->body.find("semantic"), std::string::npos);
    EXPECT_EQ(report->body.find("experience"), std::string::npos);
    auto csv = client->Get("/runs/only-1/report?format=csv");
    EXPECT_EQ(csv->body.rfind("table,row,column,value\n", 0), 0u);
    expect_api_error(client->Get("/runs/only-1/report?format=pdf"), 400, "validation");

    // No ledger yet for the dataset.
    expect_api_error(client->Get("/runs/only-1/agreement"), 404, "not_found");
    for (const auto& sys : {"atlas", "boreal"}) {
        Json label = {{"format_version", 1},
                      {"sample_id", "demo-001"},
                      {"stage", 1},
                      {"target", sys},
                      {"payload", {{"level", 2}, {"rationale", ""}}}};
        for (const auto& who : {"ann-1", "ann-2"}) {
            label["annotator_id"] = who;
            ASSERT_EQ(post("/annotation/labels", label)->status, 201);
        }
    }
    auto agreement = json(client->Get("/runs/only-1/agreement"));
    ASSERT_EQ(agreement["stages"].size(), 1u);
    EXPECT_EQ(agreement["stages"][0]["stage"], "interaction");
    EXPECT_EQ(agreement["stages"][0]["total"], 2);
}

TEST_F(ServiceFixture, RunWithBadRefsIsRejectedUpFront) {
    auto spec = to_json(demo_spec());
    spec["dataset_ref"] = "nothing-here";
    expect_api_error(post("/runs", spec), 404, "not_found");
    spec = to_json(demo_spec());
    spec["model_config_ref"] = (dir / "missing.json").string();
    expect_api_error(post("/runs", spec), 404, "not_found");
    expect_api_error(post("/runs", Json{{"run_id", "x"}}), 400, "validation");
}

TEST(ServiceConfig, FromJson) {
    auto c = ServiceConfig::from_json(Json::parse(R"({"store": "/tmp/s", "port": 0, "annotators_per_item": 3,
        "tokens": {"t": "ann"}, "reservation_ttl_seconds": 30, "page_size": 5})"));
    EXPECT_EQ(c.annotators_per_item, 3);
    EXPECT_EQ(c.tokens.at("t"), "ann");
    EXPECT_EQ(c.reservation_ttl, std::chrono::seconds(30));
    EXPECT_EQ(c.page_size, 5u);
    EXPECT_THROW(ServiceConfig::from_json(Json::parse(R"({"annotators_per_item": 0})")), Error);
}
