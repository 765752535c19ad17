#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oncosurv/corpus.hpp"
#include "oncosurv/retrieval.hpp"
#include "oncosurv/survival.hpp"

namespace oncosurv::config {

struct Paths {
    std::string corpus;               // clinical notes JSONL
    std::string emr;                  // EMR CSV
    std::string plans;                // treatment plans JSONL
    std::string drugs;                // approved drug list CSV
    std::string gold;                 // gold label JSONL (synthetic corpora)
    std::string output_dir = "out";
};

struct RetrievalSection {
    std::size_t k = 10;
    std::size_t chunk_token_limit = 2500;
    std::size_t chunk_overlap = 128;
    std::size_t embedding_dim = 256;  // hashed bag-of-words embedder
    // Per-target retrieval query templates.
    std::string phenotype_query =
        "tumor staging TNM stage grade ECOG Karnofsky performance status ER PR HER2 receptor tumor size";
    std::string outcome_query =
        "progression progressed discontinued stopped adverse effects toxicity nausea dose reduced held "
        "quality of life died death hospice comfort care";

    corpus::CorpusConfig chunking() const;
    retrieval::RetrievalConfig ranking() const;
};

struct ExtractionSection {
    std::string backend = "rule";  // rule | http
    std::string endpoint;          // http backend chat completions URL
    std::string model;
    std::string api_key;           // prefer the ONCO_API_KEY env var
    std::string embed_endpoint;    // optional http embeddings URL
    std::string embed_model;
    int shots = 2;
    int max_retries = 3;
    std::size_t context_limit_tokens = 16384;
    std::string exemplars_phenotype;  // path; empty = bundled defaults
    std::string exemplars_outcome;
    double temperature = 0.0;
};

struct CohortSection {
    int support_threshold = 20;
};

struct SurvivalSection {
    int n_trees = 300;
    int mtry = 0;  // 0 = ceil(sqrt(p))
    int min_leaf_size = 15;
    std::uint64_t seed = 42;
    double threshold = 0.5;
    double holdout_fraction = 0.2;
    std::vector<double> time_grid;  // sweep candidates in days; empty = training event times
    int importance_repeats = 5;

    survival::ForestConfig forest(unsigned workers) const;
};

struct SynthSection {
    int n_patients = 200;
    std::uint64_t seed = 9;
};

struct PipelineConfig {
    Paths paths;
    RetrievalSection retrieval;
    ExtractionSection extraction;
    CohortSection cohort;
    SurvivalSection survival;
    SynthSection synth;
    unsigned workers = 1;  // 0 = hardware concurrency
    bool lenient = false;

    void validate() const;  // throws config errors
};

// Strict parse: unknown keys anywhere are config errors naming the key path.
PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config(const std::string& path);  // file layered over defaults

// ONCO_API_KEY overrides extraction.api_key when set.
void apply_env(PipelineConfig& cfg);

nlohmann::json config_to_json(const PipelineConfig& cfg);

}  // namespace oncosurv::config
