#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "oncosurv/corpus.hpp"
#include "oncosurv/retrieval.hpp"
#include "oncosurv/schema.hpp"

namespace oncosurv::extraction {

struct Exemplar {
    std::string excerpt;
    std::string gold_json;
};

// Exemplar fixture: JSON array of {"excerpt": string, "output": object};
// every output must validate against the target schema.
std::vector<Exemplar> load_exemplars(const std::string& path, Target target);

struct ExtractionRequest {
    Target target = Target::phenotype;
    std::vector<retrieval::ScoredChunk> chunks;  // fusion order, best first
    std::vector<Exemplar> shots;
    std::string schema_id;
};

ExtractionRequest make_request(Target target, std::vector<retrieval::ScoredChunk> chunks,
                               std::vector<Exemplar> shots);

// Prior attempt fed back into the next prompt.
struct Corrective {
    std::string prior_output;
    std::vector<Violation> violations;
};

struct PromptBuild {
    std::string prompt;
    std::size_t est_tokens = 0;
    std::vector<std::string> dropped_chunk_ids;  // lowest fusion rank first
};

std::string chunk_ref(const corpus::Chunk& chunk);  // "note_id#index"

// Prompt sections in order: task instruction, schema, exemplars, chunk blocks,
// corrective context when present, output directive. Drops chunks from the
// back until the token estimate fits; throws "PromptTooLong" when one chunk
// still exceeds the limit.
PromptBuild build_prompt(const ExtractionRequest& req, std::size_t context_limit_tokens,
                         const Corrective* corrective = nullptr);

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    // Must be callable from multiple workers at once.
    virtual std::string complete(const std::string& prompt) = 0;
    virtual std::string name() const = 0;
};

// Test double. Responses are either registered per prompt (matched by hash)
// or pushed as a FIFO script consumed across calls.
class MockBackend : public LlmBackend {
public:
    void register_response(const std::string& prompt, std::string response);
    void push_response(std::string response);
    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "mock"; }
    std::vector<std::string> prompts_seen() const;
    std::size_t calls() const;

private:
    mutable std::mutex mu_;
    std::unordered_map<std::uint64_t, std::string> registry_;
    std::deque<std::string> script_;
    std::vector<std::string> seen_;
};

// Deterministic baseline: answers straight from the chunk blocks in the
// prompt using the shared lexicon, so its output is grounded by construction.
class RuleBackend : public LlmBackend {
public:
    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "rule"; }
};

PhenotypeRecord rule_phenotype(const std::vector<std::string>& chunk_texts);
OutcomeRecord rule_outcome(const std::vector<std::string>& chunk_texts);

struct CriticVerdict {
    bool valid_json = false;
    bool schema_ok = false;
    bool grounded = false;
    std::vector<Violation> violations;
    int attempt = 1;
};

nlohmann::json verdict_to_json(const CriticVerdict& v);

// Flags positive booleans and non-null values lacking lexicon support in the
// chunks; null, false, negative, and unknown are never flagged. Precondition:
// record is schema-valid.
CriticVerdict ground_check(const Record& record, const std::vector<corpus::Chunk>& chunks, int attempt = 1);

struct ExtractionResult {
    Record record;
    CriticVerdict verdict;
    int attempts = 1;
};

// Prompt, complete, validate, ground-check; retries with corrective context.
// After max_retries the last schema-valid record is returned with every
// flagged field forced to null/false (grounded stays false); backend failure
// raises "ExtractionFailed" with the note id.
ExtractionResult extract_with_critic(const ExtractionRequest& req, LlmBackend& backend, int max_retries = 3,
                                     std::size_t context_limit_tokens = 16384);

struct LabeledRecord {
    std::string note_id;
    Record record;
};

struct LabelMetrics {
    std::string label;
    std::size_t n = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t exact = 0;
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

struct CategoryMetrics {
    std::string category;  // progression, toxicity, death
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::optional<double> precision;
};

struct ExtractionEval {
    std::vector<LabelMetrics> per_label;
    std::vector<CategoryMetrics> per_category;  // outcome target only
};

nlohmann::json eval_to_json(const ExtractionEval& e);

// Pairs predicted and gold by note_id (throws "AlignmentError" on mismatch).
// A slot counts positive when non-null/true; a wrong non-null value is both a
// false positive and a miss.
ExtractionEval evaluate_extractions(const std::vector<LabeledRecord>& predicted,
                                    const std::vector<LabeledRecord>& gold);

}  // namespace oncosurv::extraction
