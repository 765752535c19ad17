#pragma once

#include <cstddef>
#include <string>

#include "oncosurv/extraction.hpp"
#include "oncosurv/retrieval.hpp"

namespace oncosurv::net {

struct HttpConfig {
    std::string endpoint;  // http://host[:port]/path
    std::string model;
    std::string api_key;  // sent as Bearer auth when non-empty
    double temperature = 0.0;
    int max_attempts = 4;
    int timeout_seconds = 60;
    int max_in_flight = 4;     // concurrent requests across workers
    int backoff_initial_ms = 250;  // doubles per retry
    std::size_t embedding_dim = 0;  // 0 = adopt the first response's length

    void validate() const;  // throws config errors
};

// OpenAI-style chat completion client. Transport errors, timeouts, 408, 429
// and 5xx responses retry with exponential backoff up to max_attempts; other
// statuses fail immediately.
class HttpChatBackend final : public extraction::LlmBackend {
  public:
    explicit HttpChatBackend(HttpConfig cfg);
    ~HttpChatBackend() override;

    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "http"; }

  private:
    struct Impl;
    Impl* impl_;
};

// Embedding endpoint client: POST {model, input: [text]} and reads
// data[0].embedding. Same retry policy as the chat client.
class HttpEmbedder final : public retrieval::EmbeddingProvider {
  public:
    explicit HttpEmbedder(HttpConfig cfg);
    ~HttpEmbedder() override;

    retrieval::EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override;

  private:
    struct Impl;
    Impl* impl_;
};

}  // namespace oncosurv::net
