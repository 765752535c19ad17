#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oncosurv/cohort.hpp"
#include "oncosurv/corpus.hpp"
#include "oncosurv/schema.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::synth {

struct SynthConfig {
    int n_patients = 200;
    std::uint64_t seed = 9;
};

// Per (note, target) ground truth. Records are derived from the planted
// sentences with the same lexicon the rule backend uses, so every positive
// label is grounded in the note text by construction.
struct GoldLabel {
    std::string patient_id;
    std::string note_id;
    std::string note_date;
    extraction::Target target = extraction::Target::phenotype;
    extraction::Record record;
};

struct SynthOutput {
    std::vector<corpus::ClinicalNote> notes;
    std::vector<cohort::TreatmentPlan> plans;  // one per patient
    std::vector<cohort::EmrRow> emr;
    std::vector<GoldLabel> gold;
    std::vector<cohort::ApprovedDrug> drugs;
};

// Deterministic per seed; patients carry 2-3 notes (staging workup at plan
// start plus follow-up), ~50% treatment failure split across progression,
// toxicity, and death mechanisms.
SynthOutput generate(const SynthConfig& cfg);

struct SynthPaths {
    std::string corpus;
    std::string emr;
    std::string plans;
    std::string gold;
    std::string drugs;
};

// Writes corpus.jsonl, emr.csv, plans.jsonl, gold.jsonl, approved_drugs.csv
// under dir (which must exist).
SynthPaths write_outputs(const SynthOutput& out, const std::string& dir);

std::vector<GoldLabel> load_gold_jsonl(const std::string& path);

const std::vector<cohort::ApprovedDrug>& default_drug_list();

// Neutral clinic prose with no lexicon triggers; building block for padding.
const std::vector<std::string>& filler_sentences();

// Filler-padded note of >= min_tokens unicode-word tokens with the needle
// sentence embedded mid-document.
std::string make_long_note(std::size_t min_tokens, const std::string& needle, util::Rng& rng);

}  // namespace oncosurv::synth
