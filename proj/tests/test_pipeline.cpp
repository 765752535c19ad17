#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oncosurv/csv.hpp"
#include "oncosurv/errors.hpp"
#include "oncosurv/pipeline.hpp"

using namespace oncosurv;
namespace fs = std::filesystem;

namespace {

config::PipelineConfig small_config(const std::string& out_dir) {
    auto cfg = config::parse_config(nlohmann::json::object());
    cfg.paths.output_dir = out_dir;
    cfg.synth.n_patients = 60;
    cfg.synth.seed = 5;
    cfg.survival.n_trees = 40;
    cfg.survival.seed = 42;
    cfg.workers = 2;
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("holdout split partitions every index exactly once") {
    for (std::size_t n : {2UL, 5UL, 37UL, 200UL}) {
        auto split = pipeline::holdout_split(n, 42, 0.2);
        CHECK(split.train.size() + split.test.size() == n);
        CHECK(!split.train.empty());
        CHECK(!split.test.empty());
        std::set<std::size_t> seen(split.train.begin(), split.train.end());
        seen.insert(split.test.begin(), split.test.end());
        CHECK(seen.size() == n);
        CHECK(*seen.rbegin() == n - 1);
        CHECK(std::is_sorted(split.train.begin(), split.train.end()));
        CHECK(std::is_sorted(split.test.begin(), split.test.end()));
    }
    auto a = pipeline::holdout_split(100, 7, 0.2);
    auto b = pipeline::holdout_split(100, 7, 0.2);
    CHECK(a.train == b.train);
    auto c = pipeline::holdout_split(100, 8, 0.2);
    CHECK(a.train != c.train);
    CHECK(pipeline::holdout_split(100, 7, 0.2).test.size() == 20);
    CHECK_THROWS_WITH_AS(pipeline::holdout_split(1, 7, 0.2), doctest::Contains("EmptyInput"), oncosurv::Error);
}

TEST_CASE("empty input paths resolve to the synthesizer outputs") {
    auto cfg = config::parse_config(nlohmann::json::object());
    cfg.paths.output_dir = "runs/demo";
    auto paths = pipeline::resolve_paths(cfg);
    CHECK(paths.corpus == "runs/demo/corpus.jsonl");
    CHECK(paths.emr == "runs/demo/emr.csv");
    CHECK(paths.plans == "runs/demo/plans.jsonl");
    CHECK(paths.drugs == "runs/demo/approved_drugs.csv");
    CHECK(paths.gold == "runs/demo/gold.jsonl");

    cfg.paths.corpus = "elsewhere/notes.jsonl";
    auto mixed = pipeline::resolve_paths(cfg);
    CHECK(mixed.corpus == "elsewhere/notes.jsonl");
    CHECK(mixed.emr == "runs/demo/emr.csv");
}

TEST_CASE("bundled exemplars validate against their schemas") {
    for (auto target : {extraction::Target::phenotype, extraction::Target::outcome}) {
        auto shots = pipeline::bundled_exemplars(target);
        CHECK(shots.size() >= 3);
        for (const auto& ex : shots) {
            auto parsed = extraction::parse_and_validate(ex.gold_json, extraction::schema_id(target));
            CHECK(parsed.schema_ok);
            CHECK_FALSE(ex.excerpt.empty());
        }
    }
}

TEST_CASE("the pipeline runs end to end and its artifacts cross-check") {
    TempDir dir("oncosurv_pipe_test");
    auto cfg = small_config(dir.path.string());
    std::ostringstream log;

    auto syn = pipeline::run_synthesize(cfg, log);
    CHECK(syn.n_patients == 60);
    CHECK(fs::exists(syn.paths.corpus));

    auto ext = pipeline::run_extract(cfg, log);
    CHECK(ext.notes == syn.n_notes);
    CHECK(ext.lines == 2 * syn.n_notes);
    CHECK(ext.ungrounded == 0);
    CHECK(fs::exists(ext.output));
    CHECK(fs::exists(ext.eval_json));

    auto lines = pipeline::load_extractions_jsonl(ext.output);
    CHECK(lines.size() == ext.lines);
    std::size_t phenos = 0;
    for (const auto& l : lines) {
        CHECK(l.result.verdict.grounded);
        if (l.target == extraction::Target::phenotype) ++phenos;
    }
    CHECK(phenos == syn.n_notes);

    auto feat = pipeline::run_featurize(cfg, log);
    CHECK(feat.n_rows == 60);
    CHECK(feat.summary.n == 60);
    CHECK(feat.summary.failure_prevalence > 0.0);
    auto ds = cohort::load_feature_csv(feat.features_csv);
    CHECK(ds.n_rows() == 60);
    auto survival_rows = cohort::load_survival_jsonl(feat.survival_jsonl);
    CHECK(survival_rows.size() == 60);
    for (std::size_t i = 0; i < survival_rows.size(); ++i) CHECK(survival_rows[i].patient_id == ds.row_ids[i]);

    auto trained = pipeline::run_train(cfg, log);
    CHECK(trained.n_train == 48);
    CHECK(trained.n_test == 12);
    CHECK(fs::exists(trained.model_path));
    auto model = survival::deserialize_model(util::read_file(trained.model_path));
    CHECK(model.config.n_trees == 40);
    CHECK(model.feature_names == ds.feature_names);

    auto eval = pipeline::run_evaluate(cfg, log);
    CHECK_NOTHROW(report::validate(eval.report));
    CHECK(eval.report.protocol.n_train == 48);
    CHECK(eval.report.protocol.n_test == 12);
    CHECK(static_cast<std::size_t>(eval.report.confusion.population()) + eval.report.n_excluded == 12);
    CHECK(fs::exists(eval.report_json));
    CHECK(fs::exists(eval.curves_svg));
    CHECK(fs::exists(eval.calibration_csv));

    std::ostringstream rendered;
    pipeline::run_report(cfg, rendered);
    CHECK(rendered.str().find("C-index") != std::string::npos);
    CHECK(rendered.str().find(std::to_string(eval.report.time_point_days)) != std::string::npos);
}

TEST_CASE("rerunning the pipeline yields byte-identical artifacts") {
    TempDir a("oncosurv_det_a");
    TempDir b("oncosurv_det_b");
    std::ostringstream log;
    for (const auto* dir : {&a, &b}) {
        auto cfg = small_config(dir->path.string());
        pipeline::run_synthesize(cfg, log);
        pipeline::run_extract(cfg, log);
        pipeline::run_featurize(cfg, log);
        pipeline::run_train(cfg, log);
        pipeline::run_evaluate(cfg, log);
    }
    for (const char* name : {"corpus.jsonl", "extractions.jsonl", "features.csv", "survival.jsonl", "model.json",
                             "eval_report.json", "survival_curves.csv", "calibration.csv"}) {
        CAPTURE(name);
        CHECK(util::read_file((a.path / name).string()) == util::read_file((b.path / name).string()));
    }
}

TEST_CASE("extraction jsonl loader rejects malformed rows") {
    TempDir dir("oncosurv_extload_test");
    auto path = (dir.path / "extractions.jsonl").string();
    {
        std::ofstream out(path);
        out << R"({"patient_id":"P1","note_id":"n1","note_date":"2020-01-01","target":"phenotype"})" << "\n";
    }
    CHECK_THROWS_AS(pipeline::load_extractions_jsonl(path), oncosurv::Error);
}

TEST_CASE("featurize reports orphan ids and honors lenient mode") {
    TempDir dir("oncosurv_orphan_test");
    auto cfg = small_config(dir.path.string());
    std::ostringstream log;
    pipeline::run_synthesize(cfg, log);
    pipeline::run_extract(cfg, log);

    // drop one patient from the EMR so ids no longer align
    auto emr_path = pipeline::resolve_paths(cfg).emr;
    auto table = util::read_file(emr_path);
    auto cut = table.find("\nP0002,");
    REQUIRE(cut != std::string::npos);
    auto next = table.find('\n', cut + 1);
    table.erase(cut, next - cut);
    util::write_file(emr_path, table);

    CHECK_THROWS_WITH_AS(pipeline::run_featurize(cfg, log), doctest::Contains("AlignmentError"), oncosurv::Error);

    cfg.lenient = true;
    auto feat = pipeline::run_featurize(cfg, log);
    CHECK(feat.n_rows == 59);
}
