#include "oncosurv/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "oncosurv/errors.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::retrieval {

void RetrievalConfig::validate() const {
    if (k < 1) throw_config("retrieval k must be >= 1");
    if (bm25_k1 <= 0.0) throw_config("bm25_k1 must be > 0");
    if (bm25_b < 0.0 || bm25_b > 1.0) throw_config("bm25_b must be in [0,1]");
}

std::vector<std::string> bm25_terms(std::string_view text) {
    std::vector<std::string> terms;
    for (auto& tok : corpus::tokenize(text, corpus::TokenizerKind::unicode_word)) {
        terms.push_back(util::to_lower(tok));
    }
    return terms;
}

EmbeddingVector HashedBowEmbedder::embed(const std::string& text) {
    if (text.empty()) throw_data("EmbeddingFailure: empty input text");
    std::vector<double> values(dim_, 0.0);
    for (const auto& term : bm25_terms(text)) {
        values[util::fnv1a64(term) % dim_] += 1.0;
    }
    double norm = std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0));
    if (norm == 0.0) throw_data("EmbeddingFailure: no tokens in input text");
    for (double& v : values) v /= norm;
    return EmbeddingVector{std::move(values)};
}

CorpusStats build_corpus_stats(const std::vector<corpus::Chunk>& chunks) {
    CorpusStats stats;
    stats.num_docs = chunks.size();
    std::size_t total_len = 0;
    for (const auto& chunk : chunks) {
        auto terms = bm25_terms(chunk.text);
        total_len += terms.size();
        std::unordered_set<std::string> distinct(terms.begin(), terms.end());
        for (const auto& t : distinct) ++stats.doc_freq[t];
    }
    stats.avg_doc_len = chunks.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(chunks.size());
    return stats;
}

namespace {

double bm25_from_tf(const std::vector<std::string>& query_terms,
                    const std::unordered_map<std::string, std::size_t>& tf, std::size_t doc_len,
                    const CorpusStats& stats, const RetrievalConfig& cfg) {
    if (stats.num_docs == 0) return 0.0;
    const double n = static_cast<double>(stats.num_docs);
    const double avgdl = stats.avg_doc_len > 0.0 ? stats.avg_doc_len : 1.0;
    double score = 0.0;
    for (const auto& term : query_terms) {
        auto it = tf.find(term);
        if (it == tf.end()) continue;
        double nt = 0.0;
        if (auto df = stats.doc_freq.find(term); df != stats.doc_freq.end()) nt = static_cast<double>(df->second);
        const double idf = std::log((n - nt + 0.5) / (nt + 0.5) + 1.0);
        const double f = static_cast<double>(it->second);
        const double norm = f + cfg.bm25_k1 * (1.0 - cfg.bm25_b + cfg.bm25_b * static_cast<double>(doc_len) / avgdl);
        score += idf * f * (cfg.bm25_k1 + 1.0) / norm;
    }
    return score;
}

}  // namespace

double bm25_score(const std::vector<std::string>& query_terms, const corpus::Chunk& chunk, const CorpusStats& stats,
                  const RetrievalConfig& cfg) {
    auto terms = bm25_terms(chunk.text);
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& t : terms) ++tf[t];
    return bm25_from_tf(query_terms, tf, terms.size(), stats, cfg);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw_data("DimensionMismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw_data("ZeroVector: cosine similarity undefined for zero vector");
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

std::vector<ScoredChunk> retrieve_top_k(const std::string& query, const std::vector<corpus::Chunk>& chunks,
                                        EmbeddingProvider& embedder, const RetrievalConfig& cfg) {
    cfg.validate();
    if (chunks.empty()) throw_data("retrieve_top_k: empty chunk list");

    const auto query_terms = bm25_terms(query);
    const auto stats = build_corpus_stats(chunks);

    EmbeddingVector query_vec;
    try {
        query_vec = embedder.embed(query);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("EmbeddingFailure on query: ") + e.what());
    }

    const std::size_t n = chunks.size();
    std::vector<double> bm25(n, 0.0);
    std::vector<double> cosine(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        bm25[i] = bm25_score(query_terms, chunks[i], stats, cfg);
        EmbeddingVector cv;
        try {
            cv = embedder.embed(chunks[i].text);
        } catch (const Error& e) {
            throw Error(e.kind(), "EmbeddingFailure on chunk " + chunks[i].note_id + "#" +
                                      std::to_string(chunks[i].chunk_index) + ": " + e.what());
        }
        cosine[i] = cosine_similarity(query_vec, cv);
    }

    // rank indices by each score; ties broken by chunk order for determinism
    auto ranked_by = [&](const std::vector<double>& score) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
        return idx;
    };
    const auto lex_rank = ranked_by(bm25);
    const auto sem_rank = ranked_by(cosine);

    const std::size_t take = std::min(cfg.k, n);
    std::unordered_map<std::size_t, double> fusion;  // chunk idx -> rrf score
    std::unordered_set<std::size_t> lexical(lex_rank.begin(), lex_rank.begin() + static_cast<long>(take));
    std::unordered_set<std::size_t> semantic(sem_rank.begin(), sem_rank.begin() + static_cast<long>(take));

    constexpr double kRrfOffset = 60.0;
    for (std::size_t r = 0; r < n; ++r) {
        fusion[lex_rank[r]] += 1.0 / (kRrfOffset + static_cast<double>(r + 1));
        fusion[sem_rank[r]] += 1.0 / (kRrfOffset + static_cast<double>(r + 1));
    }

    std::vector<std::size_t> selected;
    if (n <= cfg.k) {
        selected.resize(n);
        std::iota(selected.begin(), selected.end(), 0);
    } else {
        for (std::size_t i : lexical) selected.push_back(i);
        for (std::size_t i : semantic) {
            if (!lexical.count(i)) selected.push_back(i);
        }
    }

    std::stable_sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
        if (fusion[a] != fusion[b]) return fusion[a] > fusion[b];
        return a < b;
    });

    std::vector<ScoredChunk> out;
    out.reserve(selected.size());
    for (std::size_t i : selected) {
        ScoreSource src = ScoreSource::both;
        bool in_lex = lexical.count(i) > 0;
        bool in_sem = semantic.count(i) > 0;
        if (in_lex && !in_sem) src = ScoreSource::lexical;
        else if (!in_lex && in_sem) src = ScoreSource::semantic;
        out.push_back({chunks[i], bm25[i], cosine[i], src, fusion[i]});
    }
    return out;
}

}  // namespace oncosurv::retrieval
