#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "oncosurv/config.hpp"
#include "oncosurv/errors.hpp"
#include "oncosurv/pipeline.hpp"

namespace {

struct Overrides {
    std::optional<std::string> output_dir;
    std::optional<std::string> corpus;
    std::optional<std::string> emr;
    std::optional<std::string> plans;
    std::optional<std::string> drugs;
    std::optional<std::string> gold;
    std::optional<unsigned> workers;
    bool lenient = false;
    std::optional<std::string> backend;
    std::optional<std::string> endpoint;
    std::optional<std::string> model;
    std::optional<int> shots;
    std::optional<int> n_patients;
    std::optional<std::uint64_t> synth_seed;
    std::optional<std::uint64_t> survival_seed;
    std::optional<double> threshold;
    std::optional<int> n_trees;
};

void apply(const Overrides& ov, oncosurv::config::PipelineConfig& cfg) {
    if (ov.output_dir) cfg.paths.output_dir = *ov.output_dir;
    if (ov.corpus) cfg.paths.corpus = *ov.corpus;
    if (ov.emr) cfg.paths.emr = *ov.emr;
    if (ov.plans) cfg.paths.plans = *ov.plans;
    if (ov.drugs) cfg.paths.drugs = *ov.drugs;
    if (ov.gold) cfg.paths.gold = *ov.gold;
    if (ov.workers) cfg.workers = *ov.workers;
    if (ov.lenient) cfg.lenient = true;
    if (ov.backend) cfg.extraction.backend = *ov.backend;
    if (ov.endpoint) cfg.extraction.endpoint = *ov.endpoint;
    if (ov.model) cfg.extraction.model = *ov.model;
    if (ov.shots) cfg.extraction.shots = *ov.shots;
    if (ov.n_patients) cfg.synth.n_patients = *ov.n_patients;
    if (ov.synth_seed) cfg.synth.seed = *ov.synth_seed;
    if (ov.survival_seed) cfg.survival.seed = *ov.survival_seed;
    if (ov.threshold) cfg.survival.threshold = *ov.threshold;
    if (ov.n_trees) cfg.survival.n_trees = *ov.n_trees;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oncosurv: clinical note extraction and treatment-failure survival modeling"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "oncosurv 0.1.0");

    std::string config_path;
    Overrides ov;
    app.add_option("-c,--config", config_path, "JSON config file (defaults used when omitted)");
    app.add_option("--output-dir", ov.output_dir, "directory for all generated files");
    app.add_option("--workers", ov.workers, "worker threads (0 = hardware concurrency)");
    app.add_flag("--lenient", ov.lenient, "skip malformed corpus lines and unaligned patients instead of failing");

    CLI::App* synthesize = app.add_subcommand("synthesize", "generate the synthetic corpus, EMR, plans, and gold labels");
    synthesize->add_option("--n-patients", ov.n_patients, "number of patients");
    synthesize->add_option("--seed", ov.synth_seed, "generator seed");

    CLI::App* extract = app.add_subcommand("extract", "run retrieval-augmented extraction over the corpus");
    extract->add_option("--corpus", ov.corpus, "corpus JSONL path");
    extract->add_option("--gold", ov.gold, "gold label JSONL for extraction scoring");
    extract->add_option("--backend", ov.backend, "extraction backend: rule | http");
    extract->add_option("--endpoint", ov.endpoint, "chat completions URL (http backend)");
    extract->add_option("--model", ov.model, "model name (http backend)");
    extract->add_option("--shots", ov.shots, "exemplars per prompt");

    CLI::App* featurize = app.add_subcommand("featurize", "build the feature matrix and survival dataset");
    featurize->add_option("--emr", ov.emr, "EMR CSV path");
    featurize->add_option("--plans", ov.plans, "treatment plans JSONL path");
    featurize->add_option("--drugs", ov.drugs, "approved drug list CSV path");

    CLI::App* train = app.add_subcommand("train", "fit the random survival forest on the training split");
    train->add_option("--seed", ov.survival_seed, "forest and split seed");
    train->add_option("--trees", ov.n_trees, "number of trees");

    CLI::App* evaluate = app.add_subcommand("evaluate", "score the held-out split and write the eval report");
    evaluate->add_option("--seed", ov.survival_seed, "forest and split seed (must match train)");
    evaluate->add_option("--threshold", ov.threshold, "failure probability threshold");

    app.add_subcommand("report", "print a readable summary of an existing eval report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        oncosurv::config::PipelineConfig cfg = oncosurv::config::load_config(config_path);
        oncosurv::config::apply_env(cfg);
        apply(ov, cfg);
        cfg.validate();
        if (synthesize->parsed()) {
            oncosurv::pipeline::run_synthesize(cfg, std::cerr);
        } else if (extract->parsed()) {
            oncosurv::pipeline::run_extract(cfg, std::cerr);
        } else if (featurize->parsed()) {
            oncosurv::pipeline::run_featurize(cfg, std::cout);
        } else if (train->parsed()) {
            oncosurv::pipeline::run_train(cfg, std::cerr);
        } else if (evaluate->parsed()) {
            oncosurv::pipeline::run_evaluate(cfg, std::cerr);
        } else {
            oncosurv::pipeline::run_report(cfg, std::cout);
        }
    } catch (const oncosurv::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
