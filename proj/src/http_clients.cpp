#include "oncosurv/http_clients.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "oncosurv/errors.hpp"

namespace oncosurv::net {

using nlohmann::json;

void HttpConfig::validate() const {
    if (endpoint.empty()) throw_config("http backend requires an endpoint");
    if (!endpoint.starts_with("http://")) throw_config("endpoint must be an http:// URL, got '" + endpoint + "'");
    if (model.empty()) throw_config("http backend requires a model name");
    if (max_attempts < 1) throw_config("max_attempts must be >= 1");
    if (timeout_seconds < 1) throw_config("timeout_seconds must be >= 1");
    if (max_in_flight < 1) throw_config("max_in_flight must be >= 1");
    if (backoff_initial_ms < 0) throw_config("backoff_initial_ms must be >= 0");
}

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class InFlightGuard {
  public:
    explicit InFlightGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
    ~InFlightGuard() { sem_.release(); }
    InFlightGuard(const InFlightGuard&) = delete;
    InFlightGuard& operator=(const InFlightGuard&) = delete;

  private:
    std::counting_semaphore<>& sem_;
};

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

// One short-lived connection per request keeps the client shareable across
// workers without locking around the socket.
std::string post_with_retry(const HttpConfig& cfg, const SplitUrl& url, const std::string& body,
                            const char* what) {
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);
    std::string last_error;
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        if (attempt > 1 && cfg.backoff_initial_ms > 0) {
            auto delay = std::chrono::milliseconds(cfg.backoff_initial_ms) * (1 << (attempt - 2));
            std::this_thread::sleep_for(delay);
        }
        httplib::Client client(url.base);
        client.set_connection_timeout(cfg.timeout_seconds, 0);
        client.set_read_timeout(cfg.timeout_seconds, 0);
        client.set_write_timeout(cfg.timeout_seconds, 0);
        auto res = client.Post(url.path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 200) return res->body;
        if (retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        throw_backend(std::string(what) + ": HTTP " + std::to_string(res->status) + " from " + cfg.endpoint);
    }
    throw_backend(std::string(what) + ": " + last_error + " after " + std::to_string(cfg.max_attempts) +
                  " attempts against " + cfg.endpoint);
}

}  // namespace

struct HttpChatBackend::Impl {
    HttpConfig cfg;
    SplitUrl url;
    std::counting_semaphore<> in_flight;

    explicit Impl(HttpConfig c) : cfg(std::move(c)), url(split_url(cfg.endpoint)), in_flight(cfg.max_in_flight) {}
};

HttpChatBackend::HttpChatBackend(HttpConfig cfg) {
    cfg.validate();
    impl_ = new Impl(std::move(cfg));
}

HttpChatBackend::~HttpChatBackend() { delete impl_; }

std::string HttpChatBackend::complete(const std::string& prompt) {
    json body = {{"model", impl_->cfg.model},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", impl_->cfg.temperature}};
    InFlightGuard guard(impl_->in_flight);
    std::string raw = post_with_retry(impl_->cfg, impl_->url, body.dump(), "chat completion");
    json resp = json::parse(raw, nullptr, false);
    if (resp.is_discarded() || !resp.contains("choices") || !resp["choices"].is_array() || resp["choices"].empty())
        throw_backend("chat completion: malformed response body");
    const json& msg = resp["choices"][0];
    if (!msg.contains("message") || !msg["message"].contains("content") || !msg["message"]["content"].is_string())
        throw_backend("chat completion: response lacks choices[0].message.content");
    return msg["message"]["content"].get<std::string>();
}

struct HttpEmbedder::Impl {
    HttpConfig cfg;
    SplitUrl url;
    std::counting_semaphore<> in_flight;
    std::atomic<std::size_t> dim;

    explicit Impl(HttpConfig c)
        : cfg(std::move(c)), url(split_url(cfg.endpoint)), in_flight(cfg.max_in_flight), dim(cfg.embedding_dim) {}
};

HttpEmbedder::HttpEmbedder(HttpConfig cfg) {
    cfg.validate();
    impl_ = new Impl(std::move(cfg));
}

HttpEmbedder::~HttpEmbedder() { delete impl_; }

std::size_t HttpEmbedder::dim() const { return impl_->dim.load(); }

retrieval::EmbeddingVector HttpEmbedder::embed(const std::string& text) {
    if (text.empty()) throw_data("EmbeddingFailure: empty input text");
    json body = {{"model", impl_->cfg.model}, {"input", json::array({text})}};
    InFlightGuard guard(impl_->in_flight);
    std::string raw = post_with_retry(impl_->cfg, impl_->url, body.dump(), "embedding");
    json resp = json::parse(raw, nullptr, false);
    if (resp.is_discarded() || !resp.contains("data") || !resp["data"].is_array() || resp["data"].empty() ||
        !resp["data"][0].contains("embedding") || !resp["data"][0]["embedding"].is_array())
        throw_backend("embedding: malformed response body");
    retrieval::EmbeddingVector vec;
    for (const json& v : resp["data"][0]["embedding"]) {
        if (!v.is_number()) throw_backend("embedding: non-numeric value in response vector");
        vec.values.push_back(v.get<double>());
    }
    if (vec.values.empty()) throw_backend("embedding: response vector is empty");
    std::size_t expected = impl_->dim.load();
    if (expected == 0) impl_->dim.store(vec.values.size());
    else if (vec.values.size() != expected)
        throw_backend("embedding: response dim " + std::to_string(vec.values.size()) + " != configured dim " +
                      std::to_string(expected));
    return vec;
}

}  // namespace oncosurv::net
