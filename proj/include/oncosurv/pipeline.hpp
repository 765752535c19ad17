#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "oncosurv/cohort.hpp"
#include "oncosurv/config.hpp"
#include "oncosurv/extraction.hpp"
#include "oncosurv/report.hpp"
#include "oncosurv/synth.hpp"

namespace oncosurv::pipeline {

// Input paths left empty in the config resolve to the synthesizer's output
// names under output_dir, so subcommands chain without editing the file.
config::Paths resolve_paths(const config::PipelineConfig& cfg);

std::string output_path(const config::PipelineConfig& cfg, std::string_view name);

// Defaults used when the exemplar paths are empty; validate against the
// target schema.
std::vector<extraction::Exemplar> bundled_exemplars(extraction::Target target);

struct SynthesizeResult {
    synth::SynthPaths paths;
    std::size_t n_patients = 0;
    std::size_t n_notes = 0;
};
SynthesizeResult run_synthesize(const config::PipelineConfig& cfg, std::ostream& log);

struct ExtractionLine {
    std::string patient_id;
    std::string note_id;
    std::string note_date;
    extraction::Target target = extraction::Target::phenotype;
    extraction::ExtractionResult result;
};

struct ExtractResult {
    std::size_t notes = 0;
    std::size_t skipped = 0;     // malformed corpus lines (lenient mode)
    std::size_t lines = 0;       // JSONL records written
    std::size_t retried = 0;     // needed more than one attempt
    std::size_t ungrounded = 0;  // fail-safe nulled after exhausting retries
    std::string output;          // extractions JSONL path
    std::string eval_json;       // written when a gold file is present
};
ExtractResult run_extract(const config::PipelineConfig& cfg, std::ostream& log);

std::vector<ExtractionLine> load_extractions_jsonl(const std::string& path);

struct FeaturizeResult {
    cohort::CohortSummary summary;
    std::size_t n_rows = 0;
    std::size_t n_warnings = 0;
    std::string features_csv;
    std::string survival_jsonl;
    std::string dictionary_json;
    std::string summary_json;
};
FeaturizeResult run_featurize(const config::PipelineConfig& cfg, std::ostream& log);

// Seeded shuffle split; both sides non-empty, indices ascending.
struct HoldoutSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
HoldoutSplit holdout_split(std::size_t n, std::uint64_t seed, double holdout_fraction);

struct TrainResult {
    std::string model_path;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_features = 0;
};
TrainResult run_train(const config::PipelineConfig& cfg, std::ostream& log);

struct EvaluateResult {
    report::EvalReport report;
    survival::SweepResult sweep;
    std::string report_json;
    std::string curves_csv;
    std::string curves_svg;
    std::string calibration_csv;
    std::string calibration_svg;
};
EvaluateResult run_evaluate(const config::PipelineConfig& cfg, std::ostream& log);

// Renders an existing eval report as text.
void run_report(const config::PipelineConfig& cfg, std::ostream& log);

}  // namespace oncosurv::pipeline
