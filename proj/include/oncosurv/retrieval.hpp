#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "oncosurv/corpus.hpp"

namespace oncosurv::retrieval {

enum class Fusion { union_lists, rrf };

struct RetrievalConfig {
    std::size_t k = 10;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    Fusion fusion = Fusion::union_lists;

    void validate() const;
};

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
};

// Providers must be safely callable from multiple workers.
class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::size_t dim() const = 0;
};

// Deterministic test/offline provider: term-hash buckets over lowercased
// word tokens, L2-normalized.
class HashedBowEmbedder final : public EmbeddingProvider {
  public:
    explicit HashedBowEmbedder(std::size_t dim = 256) : dim_(dim) {}

    EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override { return dim_; }

  private:
    std::size_t dim_;
};

// Lowercased unicode-word tokens; the term stream BM25 statistics are
// computed over.
std::vector<std::string> bm25_terms(std::string_view text);

struct CorpusStats {
    std::size_t num_docs = 0;
    double avg_doc_len = 0.0;  // mean bm25-term count per chunk
    std::unordered_map<std::string, std::size_t> doc_freq;
};

// Statistics over the chunk set of the note under extraction.
CorpusStats build_corpus_stats(const std::vector<corpus::Chunk>& chunks);

// Okapi BM25 with idf(t) = ln((N - n_t + 0.5)/(n_t + 0.5) + 1); the smoothed
// idf keeps scores non-negative on tiny per-note corpora.
double bm25_score(const std::vector<std::string>& query_terms, const corpus::Chunk& chunk, const CorpusStats& stats,
                  const RetrievalConfig& cfg);

// Throws data errors "DimensionMismatch" / "ZeroVector".
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

enum class ScoreSource { lexical, semantic, both };

struct ScoredChunk {
    corpus::Chunk chunk;
    double bm25 = 0.0;
    double cosine = 0.0;
    ScoreSource source = ScoreSource::both;
    double fusion_score = 0.0;  // reciprocal-rank fusion, presentation order only
};

// Union of the BM25 top-k and cosine top-k, deduplicated, ordered by
// reciprocal-rank fusion. If |chunks| <= k all chunks are returned.
std::vector<ScoredChunk> retrieve_top_k(const std::string& query, const std::vector<corpus::Chunk>& chunks,
                                        EmbeddingProvider& embedder, const RetrievalConfig& cfg);

}  // namespace oncosurv::retrieval
