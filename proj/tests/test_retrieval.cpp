#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "oncosurv/errors.hpp"
#include "oncosurv/retrieval.hpp"
#include "oncosurv/util.hpp"

using namespace oncosurv;
using retrieval::EmbeddingVector;

namespace {

corpus::Chunk chunk_of(std::string text, std::size_t index = 0) {
    corpus::Chunk c;
    c.note_id = "n1";
    c.chunk_index = index;
    c.text = std::move(text);
    c.token_count = 0;  // retrieval recounts terms itself
    return c;
}

std::vector<corpus::Chunk> random_chunks(util::Rng& rng, std::size_t n) {
    static const std::vector<std::string> vocab = {"alpha", "beta",  "gamma", "delta", "omega",
                                                   "sigma", "kappa", "theta", "iota",  "zeta"};
    std::vector<corpus::Chunk> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        std::size_t len = 3 + rng.uniform_int(12);
        for (std::size_t w = 0; w < len; ++w) {
            if (w) text += ' ';
            text += vocab[rng.uniform_int(vocab.size())];
        }
        out.push_back(chunk_of(text, i));
    }
    return out;
}

}  // namespace

TEST_CASE("bm25 score matches the okapi formula by hand") {
    std::vector<corpus::Chunk> chunks = {chunk_of("alpha beta", 0), chunk_of("alpha alpha gamma", 1),
                                         chunk_of("delta", 2)};
    auto stats = retrieval::build_corpus_stats(chunks);
    CHECK(stats.num_docs == 3);
    CHECK(stats.avg_doc_len == doctest::Approx(2.0));
    CHECK(stats.doc_freq.at("alpha") == 2);

    retrieval::RetrievalConfig cfg;  // k1=1.2 b=0.75
    // idf = ln((3 - 2 + 0.5)/(2 + 0.5) + 1) = ln(1.6)
    // doc 1: tf=2, dl=3: tf_part = 2*2.2 / (2 + 1.2*(0.25 + 0.75*3/2))
    double idf = std::log(1.6);
    double expect = idf * (2.0 * 2.2) / (2.0 + 1.2 * (0.25 + 0.75 * 3.0 / 2.0));
    double got = retrieval::bm25_score({"alpha"}, chunks[1], stats, cfg);
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    CHECK(got == doctest::Approx(0.56657971).epsilon(1e-7));

    // absent term scores zero
    CHECK(retrieval::bm25_score({"nowhere"}, chunks[1], stats, cfg) == doctest::Approx(0.0));
}

TEST_CASE("bm25 scores stay non-negative on tiny corpora") {
    util::Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        auto chunks = random_chunks(rng, 1 + rng.uniform_int(6));
        auto stats = retrieval::build_corpus_stats(chunks);
        retrieval::RetrievalConfig cfg;
        for (const auto& c : chunks) {
            // "alpha" may appear in every doc; smoothed idf must not go negative
            CHECK(retrieval::bm25_score({"alpha"}, c, stats, cfg) >= 0.0);
        }
    }
}

TEST_CASE("bm25 terms are lowercased word tokens") {
    auto terms = retrieval::bm25_terms("ER: Positive. HER2-negative!");
    REQUIRE(terms.size() == 4);
    CHECK(terms[0] == "er");
    CHECK(terms[1] == "positive");
    CHECK(terms[2] == "her2");
    CHECK(terms[3] == "negative");
}

TEST_CASE("cosine similarity on hand vectors") {
    EmbeddingVector a{{1.0, 0.0, 1.0}};
    EmbeddingVector b{{1.0, 1.0, 0.0}};
    CHECK(retrieval::cosine_similarity(a, b) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(retrieval::cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    EmbeddingVector neg{{-1.0, 0.0, -1.0}};
    CHECK(retrieval::cosine_similarity(a, neg) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("cosine similarity error cases") {
    EmbeddingVector a{{1.0, 2.0}};
    EmbeddingVector wrong{{1.0, 2.0, 3.0}};
    EmbeddingVector zero{{0.0, 0.0}};
    CHECK_THROWS_WITH_AS(retrieval::cosine_similarity(a, wrong), doctest::Contains("DimensionMismatch"),
                         oncosurv::Error);
    CHECK_THROWS_WITH_AS(retrieval::cosine_similarity(a, zero), doctest::Contains("ZeroVector"), oncosurv::Error);
}

TEST_CASE("cosine stays within [-1, 1] on random embeddings") {
    retrieval::HashedBowEmbedder emb(64);
    util::Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        auto chunks = random_chunks(rng, 2);
        auto a = emb.embed(chunks[0].text);
        auto b = emb.embed(chunks[1].text);
        double cs = retrieval::cosine_similarity(a, b);
        CHECK(cs >= -1.0 - 1e-12);
        CHECK(cs <= 1.0 + 1e-12);
    }
}

TEST_CASE("hashed bow embedder is deterministic and unit length") {
    retrieval::HashedBowEmbedder emb(128);
    auto v1 = emb.embed("tumor is stage II with grade 2 histology");
    auto v2 = emb.embed("tumor is stage II with grade 2 histology");
    CHECK(v1.values == v2.values);
    CHECK(v1.dim() == 128);
    double norm = 0.0;
    for (double x : v1.values) norm += x * x;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("retrieve_top_k returns everything when the note is small") {
    retrieval::HashedBowEmbedder emb(64);
    retrieval::RetrievalConfig cfg;
    cfg.k = 10;
    util::Rng rng(5);
    auto chunks = random_chunks(rng, 4);
    auto out = retrieval::retrieve_top_k("alpha beta", chunks, emb, cfg);
    CHECK(out.size() == 4);
}

TEST_CASE("retrieve_top_k union size is between k and 2k") {
    retrieval::HashedBowEmbedder emb(64);
    retrieval::RetrievalConfig cfg;
    cfg.k = 5;
    util::Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        auto chunks = random_chunks(rng, 30);
        auto out = retrieval::retrieve_top_k("alpha kappa zeta", chunks, emb, cfg);
        CHECK(out.size() >= cfg.k);
        CHECK(out.size() <= 2 * cfg.k);
        std::set<std::size_t> seen;
        for (const auto& s : out) seen.insert(s.chunk.chunk_index);
        CHECK(seen.size() == out.size());  // deduplicated
    }
}

TEST_CASE("the lexical top chunk always survives fusion") {
    retrieval::HashedBowEmbedder emb(64);
    retrieval::RetrievalConfig cfg;
    cfg.k = 4;
    util::Rng rng(23);
    std::string query = "alpha omega sigma";
    auto query_terms = retrieval::bm25_terms(query);
    for (int trial = 0; trial < 30; ++trial) {
        auto chunks = random_chunks(rng, 25);
        auto stats = retrieval::build_corpus_stats(chunks);
        std::size_t best = 0;
        double best_score = -1.0;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            double s = retrieval::bm25_score(query_terms, chunks[i], stats, cfg);
            if (s > best_score) {
                best_score = s;
                best = i;
            }
        }
        auto out = retrieval::retrieve_top_k(query, chunks, emb, cfg);
        bool found = std::any_of(out.begin(), out.end(),
                                 [&](const auto& s) { return s.chunk.chunk_index == best; });
        CHECK(found);
    }
}

TEST_CASE("a planted needle chunk is retrieved from filler") {
    retrieval::HashedBowEmbedder emb(256);
    retrieval::RetrievalConfig cfg;
    cfg.k = 10;
    util::Rng rng(29);
    std::vector<corpus::Chunk> chunks = random_chunks(rng, 40);
    chunks[31].text = "Pathology demonstrates grade 3 invasive carcinoma, ER positive, HER2 negative";
    std::string query = "tumor grade ER HER2 receptor status";
    auto out = retrieval::retrieve_top_k(query, chunks, emb, cfg);
    bool found = std::any_of(out.begin(), out.end(), [](const auto& s) { return s.chunk.chunk_index == 31; });
    CHECK(found);
}

TEST_CASE("retrieval config validation") {
    retrieval::RetrievalConfig cfg;
    cfg.k = 0;
    CHECK_THROWS_AS(cfg.validate(), oncosurv::Error);
}
