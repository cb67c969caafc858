#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <random>
#include <thread>

#include "rec/gateway.hpp"
#include "rec/mock_backend.hpp"
#include "rec/schema_io.hpp"
#include "support.hpp"

using namespace rec;
using namespace std::chrono_literals;

namespace {

CompletionRequest request_for(std::string text) {
    CompletionRequest r;
    r.prompt.text = std::move(text);
    r.prompt.template_id = TemplateId::QualityEval;
    return r;
}

RetryPolicy fast_retry(int max_retries = 3) { return {max_retries, std::chrono::milliseconds(1), 2.0}; }

// Local chat-completions stand-in. Handlers record what they received.
class FakeServer {
public:
    explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(mutex_);
                bodies_.push_back(req.body);
                auth_headers_.push_back(req.get_header_value("Authorization"));
            }
            handler(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    std::vector<std::string> bodies() {
        std::lock_guard lock(mutex_);
        return bodies_;
    }
    std::vector<std::string> auth_headers() {
        std::lock_guard lock(mutex_);
        return auth_headers_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mutex_;
    std::vector<std::string> bodies_;
    std::vector<std::string> auth_headers_;
};

std::string ok_body(const std::string& content, const char* finish = "stop", bool usage = true) {
    nlohmann::json j{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", finish}}}}};
    if (usage) j["usage"] = {{"prompt_tokens", 11}, {"completion_tokens", 7}};
    return j.dump();
}

std::vector<nlohmann::json> audit_rows(const std::filesystem::path& p) {
    std::vector<nlohmann::json> rows;
    std::istringstream in(testing::slurp(p));
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
    return rows;
}

}  // namespace

TEST_CASE("sha256 matches known digests") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("mock script lookup order") {
    const auto prompt = request_for("hello world prompt");
    const nlohmann::json script{
        {"responses", {{sha256_hex("exact prompt"), "by hash"}}},
        {"rules", {{{"contains", "world"}, {"response", "by rule"}}}},
        {"default", "fallback"},
    };
    const auto mock = MockBackend::from_script(script);
    LlmGateway gw(mock);
    CHECK(gw.complete(request_for("exact prompt world")).text == "by rule");
    CHECK(gw.complete(request_for("exact prompt")).text == "by hash");
    CHECK(gw.complete(prompt).text == "by rule");
    CHECK(gw.complete(request_for("nothing matches")).text == "fallback");
    CHECK(mock->calls() == 4);

    LlmGateway bare(MockBackend::from_script(nlohmann::json::object()));
    try {
        (void)bare.complete(prompt);
        FAIL("expected refusal");
    } catch (const GatewayError& e) {
        CHECK(e.code() == ErrorCode::BackendRefusal);
    }
}

TEST_CASE("mock choices are deterministic per prompt and seed") {
    const nlohmann::json script{{"rules", {{{"contains", "x"}, {"choices", {"one", "two", "three", "four"}}}}}};
    LlmGateway a(MockBackend::from_script(script, 5));
    LlmGateway b(MockBackend::from_script(script, 5));
    std::set<std::string> seen;
    for (int i = 0; i < 40; ++i) {
        const auto req = request_for("x " + std::to_string(i));
        const auto ta = a.complete(req).text;
        CHECK(ta == b.complete(req).text);
        CHECK(ta == a.complete(req).text);
        seen.insert(ta);
    }
    CHECK(seen.size() > 1);
}

TEST_CASE("transient failures are retried and audited") {
    const testing::TempDir dir;
    const nlohmann::json script{
        {"rules", {{{"contains", "flaky"}, {"error", "transport"}, {"times", 2}}}},
        {"default", "fine"},
    };
    auto audit = std::make_shared<AuditLog>(dir / "audit.jsonl");
    LlmGateway gw(MockBackend::from_script(script), fast_retry(), audit);
    const auto r = gw.complete(request_for("flaky prompt"));
    CHECK(r.text == "fine");
    CHECK(r.retries == 2);
    CHECK(r.usage.estimated);
    CHECK(r.usage.output_tokens == 2);  // one word at 1.3 tokens, rounded up

    LlmGateway strict_gw(MockBackend::from_script(script), fast_retry(0), audit);
    try {
        (void)strict_gw.complete(request_for("flaky again"));
        FAIL("expected transport failure");
    } catch (const GatewayError& e) {
        CHECK(e.code() == ErrorCode::Transport);
        CHECK(e.transient());
    }
    audit.reset();
    const auto rows = audit_rows(dir / "audit.jsonl");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["status"] == "ok");
    CHECK(rows[0]["retries"] == 2);
    CHECK(rows[0]["prompt_sha256"] == sha256_hex("flaky prompt"));
    CHECK(rows[1]["status"] != "ok");
    for (const auto& row : rows) {
        for (const char* key : {"ts", "prompt_sha256", "status", "latency_ms", "output_tokens", "retries"})
            CHECK(row.contains(key));
        CHECK(row.dump().find("flaky") == std::string::npos);  // prompts are hashed, never logged
    }
}

TEST_CASE("non-transient failures are not retried") {
    for (const char* kind : {"auth", "refusal"}) {
        const nlohmann::json script{{"rules", {{{"contains", ""}, {"error", kind}}}}};
        const auto mock = MockBackend::from_script(script);
        LlmGateway gw(mock, fast_retry());
        CHECK_THROWS_AS(gw.complete(request_for("p")), GatewayError);
        CHECK(mock->calls() == 1);
    }
}

TEST_CASE("empty truncated completions fail as Truncated") {
    const nlohmann::json script{{"rules", {{{"contains", "cut"}, {"error", "truncated"}}}}};
    LlmGateway gw(MockBackend::from_script(script));
    try {
        (void)gw.complete(request_for("cut off"));
        FAIL("expected truncation");
    } catch (const GatewayError& e) {
        CHECK(e.code() == ErrorCode::Truncated);
    }
}

TEST_CASE("request arguments are validated") {
    LlmGateway gw(std::make_shared<MockBackend>([](const CompletionRequest&) { return "x"; }));
    auto r = request_for("p");
    r.max_output_tokens = 0;
    CHECK_THROWS_AS(gw.complete(r), RecError);
    r.max_output_tokens = 5;
    r.temperature = -1;
    CHECK_THROWS_AS(gw.complete(r), RecError);
    CHECK_THROWS_AS(gw.complete_batch({}, 0), RecError);
    CHECK(gw.complete_batch({}, 3).empty());
}

TEST_CASE("batch keeps input order and bounds concurrency") {
    auto mock = std::make_shared<MockBackend>([](const CompletionRequest& r) { return "echo:" + r.prompt.text; },
                                              [](const CompletionRequest&) { return 20; });
    LlmGateway gw(mock);
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < 10; ++i) reqs.push_back(request_for("p" + std::to_string(i)));
    const auto slots = gw.complete_batch(reqs, 3);
    REQUIRE(slots.size() == 10);
    for (int i = 0; i < 10; ++i) {
        REQUIRE(slots[i].ok());
        CHECK(slots[i].result->text == "echo:p" + std::to_string(i));
    }
    CHECK(mock->peak_in_flight() <= 3);
    CHECK(mock->peak_in_flight() >= 2);
}

TEST_CASE("a failing slot does not affect its neighbours") {
    const nlohmann::json script{
        {"rules", {{{"contains", "p3"}, {"error", "auth"}}, {{"contains", "p"}, {"response", "ok"}}}},
    };
    LlmGateway gw(MockBackend::from_script(script), fast_retry());
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < 6; ++i) reqs.push_back(request_for("p" + std::to_string(i)));
    const auto slots = gw.complete_batch(reqs, 4);
    for (int i = 0; i < 6; ++i) {
        if (i == 3) {
            CHECK_FALSE(slots[i].ok());
            CHECK(slots[i].error == ErrorCode::AuthFailure);
        } else {
            CHECK(slots[i].ok());
        }
    }
}

TEST_CASE("cancellation marks unstarted slots") {
    std::stop_source stop;
    std::atomic<int> started{0};
    auto mock = std::make_shared<MockBackend>(
        [&](const CompletionRequest&) {
            if (++started == 2) stop.request_stop();
            return std::string("done");
        },
        [](const CompletionRequest&) { return 5; });
    LlmGateway gw(mock);
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < 20; ++i) reqs.push_back(request_for("p" + std::to_string(i)));
    const auto slots = gw.complete_batch(reqs, 1, stop.get_token());
    std::size_t done = 0, cancelled = 0;
    for (const auto& s : slots) {
        if (s.ok()) ++done;
        else if (s.error == ErrorCode::Cancelled) ++cancelled;
    }
    CHECK(done == 2);
    CHECK(cancelled == 18);
}

TEST_CASE("property: batch results are independent of scheduling") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t seed = rng();
        const nlohmann::json script{{"latency_ms", {0, 3}}, {"seed", seed},
                                    {"rules", {{{"contains", "q"}, {"choices", {"a", "b", "c"}}}}}};
        LlmGateway gw(MockBackend::from_script(script));
        std::vector<CompletionRequest> reqs;
        const int n = 1 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) reqs.push_back(request_for("q" + std::to_string(rng() % 1000)));
        const auto serial = gw.complete_batch(reqs, 1);
        const auto parallel = gw.complete_batch(reqs, 1 + rng() % 8);
        REQUIRE(serial.size() == parallel.size());
        for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i].result->text == parallel[i].result->text);
    }
}

TEST_CASE("pairwise mock behaviours") {
    const PromptBuilder builder;
    const auto prompt = builder.pairwise("Say hi", "hello there", "greetings, friend");
    CompletionRequest req{prompt};
    const auto split = split_pairwise_prompt(prompt.text);
    REQUIRE(split.has_value());
    CHECK(split->first == "hello there");
    CHECK(split->second == "greetings, friend");

    auto judge = [&](nlohmann::json behaviour) {
        return LlmGateway(MockBackend::from_script({{"pairwise", behaviour}})).complete(req).text;
    };
    CHECK(judge("always_first") == "Output (a)");
    CHECK(judge("always_second") == "Output (b)");
    CHECK(judge({{"prefer", "friend"}}) == "Output (b)");
    CHECK(judge("lexicographic") == "Output (b)");  // "greetings" < "hello"
    CHECK_THROWS_AS(MockBackend::from_script({{"pairwise", "coin_flip"}}), RecError);
}

TEST_CASE("HTTP backend: request shape and credential placement") {
    FakeServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content(ok_body("{\"answer\": \"Yes\"}"), "application/json");
    });
    const std::string key = "sk-test-secret-123";
    auto backend = std::make_shared<HttpChatBackend>(HttpBackendConfig{server.base_url(), "test-model", key, 5000});
    LlmGateway gw(backend, fast_retry());
    auto req = request_for("Evaluate this.");
    req.seed = 17;
    req.max_output_tokens = 64;
    const auto r = gw.complete(req);
    CHECK(r.text == "{\"answer\": \"Yes\"}");
    CHECK(r.usage.prompt_tokens == 11);
    CHECK(r.usage.output_tokens == 7);
    CHECK_FALSE(r.usage.estimated);
    CHECK_FALSE(r.truncated);

    const auto bodies = server.bodies();
    REQUIRE(bodies.size() == 1);
    CHECK(bodies[0].find(key) == std::string::npos);
    CHECK(server.auth_headers()[0] == "Bearer " + key);
    const auto body = nlohmann::json::parse(bodies[0]);
    CHECK(body["model"] == "test-model");
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(body["messages"][0]["content"] == "Evaluate this.");
    CHECK(body["max_tokens"] == 64);
    CHECK(body["seed"] == 17);
    CHECK(body["temperature"] == 0.0);
    CHECK(backend->request_body(req).find(key) == std::string::npos);
}

TEST_CASE("HTTP backend: 401 is an auth failure without retries") {
    FakeServer server([](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
        res.set_content("{\"error\":\"bad key\"}", "application/json");
    });
    LlmGateway gw(std::make_shared<HttpChatBackend>(HttpBackendConfig{server.base_url(), "m", "wrong", 5000}),
                  fast_retry());
    try {
        (void)gw.complete(request_for("p"));
        FAIL("expected AuthFailure");
    } catch (const GatewayError& e) {
        CHECK(e.code() == ErrorCode::AuthFailure);
        CHECK(e.http_status() == 401);
    }
    CHECK(server.bodies().size() == 1);
}

TEST_CASE("HTTP backend: 503 then 200 succeeds after one retry") {
    std::atomic<int> hits{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        if (hits++ == 0) {
            res.status = 503;
            res.set_content("busy", "text/plain");
            return;
        }
        res.set_content(ok_body("done", "length", false), "application/json");
    });
    const testing::TempDir dir;
    auto audit = std::make_shared<AuditLog>(dir / "audit.jsonl");
    LlmGateway gw(std::make_shared<HttpChatBackend>(HttpBackendConfig{server.base_url(), "m", "", 5000}),
                  fast_retry(), audit);
    const auto r = gw.complete(request_for("one two three"));
    CHECK(r.text == "done");
    CHECK(r.retries == 1);
    CHECK(r.truncated);
    CHECK(r.usage.estimated);
    CHECK(r.usage.prompt_tokens == 4);
    CHECK(server.auth_headers()[0].empty());
    audit.reset();
    const auto rows = audit_rows(dir / "audit.jsonl");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["retries"] == 1);
    CHECK(rows[0]["status"] == "ok");
}

TEST_CASE("HTTP backend: other errors") {
    FakeServer server([](const httplib::Request& req, httplib::Response& res) {
        if (req.body.find("bad-request") != std::string::npos) {
            res.status = 400;
            res.set_content("nope", "text/plain");
        } else {
            res.set_content("not json", "application/json");
        }
    });
    LlmGateway gw(std::make_shared<HttpChatBackend>(HttpBackendConfig{server.base_url(), "m", "", 5000}),
                  fast_retry());
    for (const char* p : {"bad-request", "other"}) {
        try {
            (void)gw.complete(request_for(p));
            FAIL("expected refusal");
        } catch (const GatewayError& e) {
            CHECK(e.code() == ErrorCode::BackendRefusal);
        }
    }
    CHECK(server.bodies().size() == 2);

    // Nothing listens on this port.
    LlmGateway dead(std::make_shared<HttpChatBackend>(HttpBackendConfig{"http://127.0.0.1:1/v1", "m", "", 500}),
                    fast_retry(1));
    try {
        (void)dead.complete(request_for("p"));
        FAIL("expected transport failure");
    } catch (const GatewayError& e) {
        CHECK(e.code() == ErrorCode::Transport);
    }
    CHECK_THROWS_AS(HttpChatBackend(HttpBackendConfig{"no-scheme", "m", "", 10}), RecError);
}
