#include <doctest.h>

#include <atomic>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "oncosurv/errors.hpp"
#include "oncosurv/http_clients.hpp"

using namespace oncosurv;
using nlohmann::json;

namespace {

// Local test server; each instance binds an ephemeral port.
struct TestServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    TestServer() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~TestServer() {
        server.stop();
        thread.join();
    }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

std::string chat_body(const std::string& content) {
    return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

net::HttpConfig fast_config(const std::string& endpoint) {
    net::HttpConfig cfg;
    cfg.endpoint = endpoint;
    cfg.model = "test-model";
    cfg.backoff_initial_ms = 1;  // keep retries fast under test
    cfg.timeout_seconds = 5;
    return cfg;
}

}  // namespace

TEST_CASE("chat client posts an openai-style body and returns the content") {
    TestServer ts;
    std::string seen_body;
    std::string seen_auth;
    ts.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        seen_auth = req.get_header_value("Authorization");
        res.set_content(chat_body("{\"answer\": 42}"), "application/json");
    });

    auto cfg = fast_config(ts.url("/v1/chat/completions"));
    cfg.api_key = "sk-test";
    cfg.temperature = 0.25;
    net::HttpChatBackend backend(cfg);
    CHECK(backend.complete("extract the record") == "{\"answer\": 42}");

    auto body = json::parse(seen_body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("temperature") == doctest::Approx(0.25));
    CHECK(body.at("messages")[0].at("content") == "extract the record");
    CHECK(seen_auth == "Bearer sk-test");
}

TEST_CASE("retryable statuses are retried until success") {
    TestServer ts;
    std::atomic<int> calls{0};
    ts.server.Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        int n = ++calls;
        if (n < 3) {
            res.status = n == 1 ? 500 : 429;
            res.set_content("busy", "text/plain");
        } else {
            res.set_content(chat_body("ok"), "application/json");
        }
    });

    net::HttpChatBackend backend(fast_config(ts.url("/chat")));
    CHECK(backend.complete("p") == "ok");
    CHECK(calls.load() == 3);
}

TEST_CASE("non-retryable statuses fail immediately") {
    TestServer ts;
    std::atomic<int> calls{0};
    ts.server.Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 404;
    });

    net::HttpChatBackend backend(fast_config(ts.url("/chat")));
    try {
        backend.complete("p");
        FAIL("expected a backend error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::backend);
        CHECK(std::string(e.what()).find("404") != std::string::npos);
    }
    CHECK(calls.load() == 1);
}

TEST_CASE("the retry budget is finite") {
    TestServer ts;
    std::atomic<int> calls{0};
    ts.server.Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });

    auto cfg = fast_config(ts.url("/chat"));
    cfg.max_attempts = 3;
    net::HttpChatBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete("p"), oncosurv::Error);
    CHECK(calls.load() == 3);
}

TEST_CASE("an unreachable endpoint is a backend error") {
    // bind-then-close to find a port with nothing listening
    int dead_port = 0;
    {
        TestServer probe;
        dead_port = probe.port;
    }
    auto cfg = fast_config("http://127.0.0.1:" + std::to_string(dead_port) + "/chat");
    cfg.max_attempts = 2;
    net::HttpChatBackend backend(cfg);
    try {
        backend.complete("p");
        FAIL("expected a backend error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::backend);
    }
}

TEST_CASE("malformed chat responses are backend errors") {
    TestServer ts;
    ts.server.Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"unexpected\": true}", "application/json");
    });
    net::HttpChatBackend backend(fast_config(ts.url("/chat")));
    CHECK_THROWS_AS(backend.complete("p"), oncosurv::Error);
}

TEST_CASE("embedder reads data[0].embedding and pins the dimension") {
    TestServer ts;
    std::atomic<int> calls{0};
    ts.server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body);
        CHECK(body.at("input").is_array());
        int n = ++calls;
        json vec = n <= 2 ? json::array({0.1, 0.2, 0.3}) : json::array({0.1, 0.2});
        res.set_content(json{{"data", json::array({{{"embedding", vec}}})}}.dump(), "application/json");
    });

    net::HttpEmbedder emb(fast_config(ts.url("/embed")));
    CHECK(emb.dim() == 0);  // unknown until the first response
    auto v = emb.embed("first text");
    CHECK(v.values == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(emb.dim() == 3);
    CHECK(emb.embed("second text").dim() == 3);

    // third response shrinks the vector: dimension mismatch
    CHECK_THROWS_AS(emb.embed("third text"), oncosurv::Error);
}

TEST_CASE("embedder enforces a configured dimension") {
    TestServer ts;
    ts.server.Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"data", json::array({{{"embedding", json::array({1.0, 0.0})}}})}}.dump(),
                        "application/json");
    });
    auto cfg = fast_config(ts.url("/embed"));
    cfg.embedding_dim = 8;
    net::HttpEmbedder emb(cfg);
    CHECK_THROWS_AS(emb.embed("text"), oncosurv::Error);
    CHECK(emb.dim() == 8);  // the configured dimension stays pinned
}

TEST_CASE("config validation rejects bad endpoints") {
    net::HttpConfig cfg;
    cfg.endpoint = "ftp://host/x";
    cfg.model = "m";
    CHECK_THROWS_AS(cfg.validate(), oncosurv::Error);
    cfg.endpoint = "http://host/x";
    cfg.model.clear();
    CHECK_THROWS_AS(cfg.validate(), oncosurv::Error);
    cfg.model = "m";
    CHECK_NOTHROW(cfg.validate());
}
