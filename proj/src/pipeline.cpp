#include "oncosurv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oncosurv/csv.hpp"
#include "oncosurv/errors.hpp"
#include "oncosurv/http_clients.hpp"
#include "oncosurv/parallel.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::pipeline {

using nlohmann::json;
using extraction::Target;

namespace fs = std::filesystem;

config::Paths resolve_paths(const config::PipelineConfig& cfg) {
    config::Paths p = cfg.paths;
    auto fallback = [&](std::string& path, const char* name) {
        if (path.empty()) path = p.output_dir + "/" + name;
    };
    fallback(p.corpus, "corpus.jsonl");
    fallback(p.emr, "emr.csv");
    fallback(p.plans, "plans.jsonl");
    fallback(p.drugs, "approved_drugs.csv");
    fallback(p.gold, "gold.jsonl");
    return p;
}

std::string output_path(const config::PipelineConfig& cfg, std::string_view name) {
    return cfg.paths.output_dir + "/" + std::string(name);
}

namespace {

std::string fmt(double v, int decimals = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v, int decimals = 3) {
    return v ? fmt(*v, decimals) : std::string("n/a");
}

void ensure_output_dir(const config::PipelineConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.paths.output_dir, ec);
    if (ec) throw_data("cannot create output directory '" + cfg.paths.output_dir + "': " + ec.message());
}

std::unique_ptr<extraction::LlmBackend> make_backend(const config::PipelineConfig& cfg) {
    if (cfg.extraction.backend == "rule") return std::make_unique<extraction::RuleBackend>();
    if (cfg.extraction.backend == "http") {
        net::HttpConfig hc;
        hc.endpoint = cfg.extraction.endpoint;
        hc.model = cfg.extraction.model;
        hc.api_key = cfg.extraction.api_key;
        hc.temperature = cfg.extraction.temperature;
        return std::make_unique<net::HttpChatBackend>(hc);
    }
    throw_config("unknown extraction backend '" + cfg.extraction.backend + "'");
}

std::unique_ptr<retrieval::EmbeddingProvider> make_embedder(const config::PipelineConfig& cfg) {
    if (cfg.extraction.backend == "http" && !cfg.extraction.embed_endpoint.empty()) {
        net::HttpConfig hc;
        hc.endpoint = cfg.extraction.embed_endpoint;
        hc.model = cfg.extraction.embed_model;
        hc.api_key = cfg.extraction.api_key;
        hc.embedding_dim = cfg.retrieval.embedding_dim;
        return std::make_unique<net::HttpEmbedder>(hc);
    }
    return std::make_unique<retrieval::HashedBowEmbedder>(cfg.retrieval.embedding_dim);
}

std::vector<extraction::Exemplar> load_shots(const config::PipelineConfig& cfg, Target target) {
    const std::string& path = target == Target::phenotype ? cfg.extraction.exemplars_phenotype
                                                          : cfg.extraction.exemplars_outcome;
    std::vector<extraction::Exemplar> pool =
        path.empty() ? bundled_exemplars(target) : extraction::load_exemplars(path, target);
    auto k = static_cast<std::size_t>(cfg.extraction.shots);
    if (pool.size() < k)
        throw_config("extraction.shots = " + std::to_string(k) + " but only " + std::to_string(pool.size()) +
                     " exemplars are available for target '" + extraction::to_string(target) + "'");
    pool.resize(k);
    return pool;
}

const std::string& query_for(const config::PipelineConfig& cfg, Target target) {
    return target == Target::phenotype ? cfg.retrieval.phenotype_query : cfg.retrieval.outcome_query;
}

json extraction_line_to_json(const ExtractionLine& line) {
    return json{{"patient_id", line.patient_id},
                {"note_id", line.note_id},
                {"note_date", line.note_date},
                {"target", extraction::to_string(line.target)},
                {"record", extraction::record_to_json(line.result.record)},
                {"verdict", extraction::verdict_to_json(line.result.verdict)},
                {"attempts", line.result.attempts}};
}

data::Dataset subset_dataset(const data::Dataset& ds, const std::vector<std::size_t>& idx) {
    data::Dataset out;
    out.feature_names = ds.feature_names;
    out.columns.resize(ds.columns.size());
    for (std::size_t i : idx) out.row_ids.push_back(ds.row_ids[i]);
    for (std::size_t f = 0; f < ds.columns.size(); ++f) {
        out.columns[f].reserve(idx.size());
        for (std::size_t i : idx) out.columns[f].push_back(ds.columns[f][i]);
    }
    return out;
}

std::vector<data::SurvivalRecord> subset_records(const std::vector<data::SurvivalRecord>& records,
                                                 const std::vector<std::size_t>& idx) {
    std::vector<data::SurvivalRecord> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(records[i]);
    return out;
}

struct ModelData {
    survival::SurvivalForestModel model;
    data::Dataset features;
    std::vector<data::SurvivalRecord> records;
    HoldoutSplit split;
};

std::pair<data::Dataset, std::vector<data::SurvivalRecord>> load_training_inputs(
    const config::PipelineConfig& cfg) {
    data::Dataset ds = cohort::load_feature_csv(output_path(cfg, "features.csv"));
    std::vector<data::SurvivalRecord> records = cohort::load_survival_jsonl(output_path(cfg, "survival.jsonl"));
    if (ds.n_rows() != records.size())
        throw_data("AlignmentError: features.csv has " + std::to_string(ds.n_rows()) +
                   " rows but survival.jsonl has " + std::to_string(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (ds.row_ids[i] != records[i].patient_id)
            throw_data("AlignmentError: row " + std::to_string(i) + " is '" + ds.row_ids[i] +
                       "' in features.csv but '" + records[i].patient_id + "' in survival.jsonl");
    }
    return {std::move(ds), std::move(records)};
}

std::optional<double> micro_precision(const extraction::ExtractionEval& eval) {
    std::size_t tp = 0, fp = 0;
    for (const auto& lm : eval.per_label) {
        tp += lm.tp;
        fp += lm.fp;
    }
    if (tp + fp == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

}  // namespace

std::vector<extraction::Exemplar> bundled_exemplars(Target target) {
    auto make = [](const char* excerpt, const json& output) {
        return extraction::Exemplar{excerpt, output.dump()};
    };
    if (target == Target::phenotype) {
        return {
            make("Pathology confirms a 2.1 cm grade 2 tumor. Staging is cT2 cN0 cM0, stage group IIA. "
                 "Receptor testing returns ER positive, PR positive, HER2 negative. ECOG performance status is 1.",
                 json{{"t_stage", "T2"},
                      {"n_stage", "N0"},
                      {"m_stage", "M0"},
                      {"stage_group", "IIA"},
                      {"tumor_size_cm", 2.1},
                      {"grade", "G2"},
                      {"ecog", 1},
                      {"karnofsky", nullptr},
                      {"er", "positive"},
                      {"pr", "positive"},
                      {"her2", "negative"}}),
            make("Routine follow-up visit. Karnofsky performance score 80. No staging update today.",
                 json{{"t_stage", nullptr},
                      {"n_stage", nullptr},
                      {"m_stage", nullptr},
                      {"stage_group", nullptr},
                      {"tumor_size_cm", nullptr},
                      {"grade", nullptr},
                      {"ecog", nullptr},
                      {"karnofsky", 80},
                      {"er", "unknown"},
                      {"pr", "unknown"},
                      {"her2", "unknown"}}),
            make("Biopsy reveals grade 3 histology. The dominant lesion measures 4.5 cm in diameter. "
                 "IHC panel: HER2 positive.",
                 json{{"t_stage", nullptr},
                      {"n_stage", nullptr},
                      {"m_stage", nullptr},
                      {"stage_group", nullptr},
                      {"tumor_size_cm", 4.5},
                      {"grade", "G3"},
                      {"ecog", nullptr},
                      {"karnofsky", nullptr},
                      {"er", "unknown"},
                      {"pr", "unknown"},
                      {"her2", "positive"}}),
        };
    }
    json no_progression{{"progressed", false}, {"discontinued", false}, {"details", ""}};
    json no_toxicity{{"adverse_effects", false},
                     {"qol_deterioration", false},
                     {"discontinued_or_modified", false},
                     {"details", ""}};
    json no_death{{"died", false}, {"hospice", false}, {"event_date", nullptr}, {"details", ""}};
    return {
        make("Restaging imaging demonstrates disease progression. Treatment was discontinued after "
             "multidisciplinary review.",
             json{{"progression",
                   {{"progressed", true},
                    {"discontinued", true},
                    {"details",
                     "Restaging imaging demonstrates disease progression; Treatment was discontinued after "
                     "multidisciplinary review"}}},
                  {"toxicity",
                   {{"adverse_effects", false},
                    {"qol_deterioration", false},
                    {"discontinued_or_modified", true},
                    {"details", "Treatment was discontinued after multidisciplinary review"}}},
                  {"death_hospice", no_death}}),
        make("She reports persistent nausea and vomiting. The dose was reduced by one level.",
             json{{"progression", no_progression},
                  {"toxicity",
                   {{"adverse_effects", true},
                    {"qol_deterioration", false},
                    {"discontinued_or_modified", true},
                    {"details",
                     "She reports persistent nausea and vomiting; The dose was reduced by one level"}}},
                  {"death_hospice", no_death}}),
        make("He was transitioned to hospice care on 2020-07-14.",
             json{{"progression", no_progression},
                  {"toxicity", no_toxicity},
                  {"death_hospice",
                   {{"died", false},
                    {"hospice", true},
                    {"event_date", "2020-07-14"},
                    {"details", "He was transitioned to hospice care on 2020-07-14"}}}}),
    };
}

SynthesizeResult run_synthesize(const config::PipelineConfig& cfg, std::ostream& log) {
    ensure_output_dir(cfg);
    synth::SynthConfig sc;
    sc.n_patients = cfg.synth.n_patients;
    sc.seed = cfg.synth.seed;
    synth::SynthOutput out = synth::generate(sc);
    SynthesizeResult res;
    res.paths = synth::write_outputs(out, cfg.paths.output_dir);
    res.n_patients = out.plans.size();
    res.n_notes = out.notes.size();
    log << "[synthesize] " << res.n_patients << " patients, " << res.n_notes << " notes, " << out.gold.size()
        << " gold records -> " << cfg.paths.output_dir << "\n";
    return res;
}

ExtractResult run_extract(const config::PipelineConfig& cfg, std::ostream& log) {
    ensure_output_dir(cfg);
    config::Paths paths = resolve_paths(cfg);
    corpus::LoadReport loaded = corpus::load_corpus_jsonl(paths.corpus, cfg.lenient);
    for (const std::string& s : loaded.skipped) log << "[extract] skipped " << s << "\n";
    if (loaded.notes.empty()) throw_data("EmptyInput: corpus '" + paths.corpus + "' has no usable notes");

    std::unique_ptr<extraction::LlmBackend> backend = make_backend(cfg);
    std::unique_ptr<retrieval::EmbeddingProvider> embedder = make_embedder(cfg);
    std::vector<extraction::Exemplar> phenotype_shots = load_shots(cfg, Target::phenotype);
    std::vector<extraction::Exemplar> outcome_shots = load_shots(cfg, Target::outcome);
    corpus::CorpusConfig chunk_cfg = cfg.retrieval.chunking();
    retrieval::RetrievalConfig rank_cfg = cfg.retrieval.ranking();

    const std::vector<corpus::ClinicalNote>& notes = loaded.notes;
    std::vector<ExtractionLine> slots(notes.size() * 2);
    std::atomic<std::size_t> done{0};
    std::mutex log_mu;
    util::parallel_for(notes.size(), cfg.workers, [&](std::size_t i) {
        const corpus::ClinicalNote& note = notes[i];
        corpus::ClinicalNote pre = note;
        pre.text = corpus::preprocess_note(note.text);
        std::vector<corpus::Chunk> chunks = corpus::chunk_note(pre, chunk_cfg);
        for (Target target : {Target::phenotype, Target::outcome}) {
            std::vector<retrieval::ScoredChunk> scored =
                retrieval::retrieve_top_k(query_for(cfg, target), chunks, *embedder, rank_cfg);
            extraction::ExtractionRequest req = extraction::make_request(
                target, std::move(scored), target == Target::phenotype ? phenotype_shots : outcome_shots);
            ExtractionLine& slot = slots[i * 2 + (target == Target::phenotype ? 0 : 1)];
            slot.patient_id = note.patient_id;
            slot.note_id = note.note_id;
            slot.note_date = note.note_date;
            slot.target = target;
            slot.result = extraction::extract_with_critic(req, *backend, cfg.extraction.max_retries,
                                                          cfg.extraction.context_limit_tokens);
        }
        std::size_t n = ++done;
        if (n % 100 == 0) {
            std::lock_guard<std::mutex> lock(log_mu);
            log << "[extract] " << n << "/" << notes.size() << " notes\n";
        }
    });

    ExtractResult res;
    res.notes = notes.size();
    res.skipped = loaded.skipped.size();
    res.output = output_path(cfg, "extractions.jsonl");
    std::ostringstream body;
    for (std::size_t i = 0; i < notes.size(); ++i) {
        std::string verdicts;
        for (std::size_t t = 0; t < 2; ++t) {
            const ExtractionLine& line = slots[i * 2 + t];
            body << extraction_line_to_json(line).dump() << "\n";
            ++res.lines;
            if (line.result.attempts > 1) ++res.retried;
            if (!line.result.verdict.grounded) ++res.ungrounded;
            verdicts += " " + extraction::to_string(line.target) +
                        (line.result.verdict.grounded ? "=ok(" : "=ungrounded(") +
                        std::to_string(line.result.attempts) + ")";
        }
        log << "[extract] " << notes[i].note_id << verdicts << "\n";
    }
    util::write_file(res.output, body.str());
    log << "[extract] wrote " << res.lines << " records to " << res.output << " (retried " << res.retried
        << ", ungrounded " << res.ungrounded << ")\n";

    if (!paths.gold.empty() && fs::exists(paths.gold)) {
        std::vector<synth::GoldLabel> gold = synth::load_gold_jsonl(paths.gold);
        std::vector<extraction::LabeledRecord> gold_ph, gold_out, pred_ph, pred_out;
        for (const auto& gl : gold) {
            (gl.target == Target::phenotype ? gold_ph : gold_out).push_back({gl.note_id, gl.record});
        }
        for (const auto& line : slots) {
            (line.target == Target::phenotype ? pred_ph : pred_out).push_back({line.note_id, line.result.record});
        }
        extraction::ExtractionEval ph = extraction::evaluate_extractions(pred_ph, gold_ph);
        extraction::ExtractionEval oc = extraction::evaluate_extractions(pred_out, gold_out);
        json eval{{"phenotype", extraction::eval_to_json(ph)}, {"outcome", extraction::eval_to_json(oc)}};
        res.eval_json = output_path(cfg, "extraction_eval.json");
        util::write_file(res.eval_json, eval.dump(2) + "\n");
        log << "[extract] vs gold: phenotype micro-precision " << fmt_opt(micro_precision(ph))
            << ", outcome micro-precision " << fmt_opt(micro_precision(oc)) << " -> " << res.eval_json << "\n";
    }
    return res;
}

std::vector<ExtractionLine> load_extractions_jsonl(const std::string& path) {
    std::vector<ExtractionLine> out;
    std::istringstream in(util::read_file(path));
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (util::trim(line).empty()) continue;
        std::string where = path + " line " + std::to_string(ln);
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw_data(where + ": not a JSON object");
        for (const auto& [key, value] : j.items()) {
            (void)value;
            static const std::set<std::string> known = {"patient_id", "note_id", "note_date", "target",
                                                        "record",     "verdict", "attempts"};
            if (!known.count(key)) throw_data(where + ": unknown key '" + key + "'");
        }
        for (const char* key : {"patient_id", "note_id", "note_date", "target", "record", "verdict", "attempts"}) {
            if (!j.contains(key)) throw_data(where + ": missing key '" + std::string(key) + "'");
        }
        ExtractionLine el;
        el.patient_id = j.at("patient_id").get<std::string>();
        el.note_id = j.at("note_id").get<std::string>();
        el.note_date = j.at("note_date").get<std::string>();
        auto target = extraction::target_from_string(j.at("target").get<std::string>());
        if (!target) throw_data(where + ": unknown target '" + j.at("target").get<std::string>() + "'");
        el.target = *target;
        extraction::ParseResult parsed =
            extraction::parse_and_validate(j.at("record").dump(), extraction::schema_id(el.target));
        if (!parsed.record) {
            std::string reasons;
            for (const auto& v : parsed.violations) reasons += " [" + v.field + ": " + v.reason + "]";
            throw_data(where + ": record does not validate:" + reasons);
        }
        el.result.record = *parsed.record;
        const json& v = j.at("verdict");
        if (!v.is_object()) throw_data(where + ": verdict must be an object");
        el.result.verdict.valid_json = v.value("valid_json", false);
        el.result.verdict.schema_ok = v.value("schema_ok", false);
        el.result.verdict.grounded = v.value("grounded", false);
        el.result.verdict.attempt = v.value("attempt", 1);
        if (v.contains("violations") && v.at("violations").is_array()) {
            for (const json& viol : v.at("violations")) {
                el.result.verdict.violations.push_back(
                    {viol.value("field", ""), viol.value("reason", "")});
            }
        }
        el.result.attempts = j.at("attempts").get<int>();
        out.push_back(std::move(el));
    }
    return out;
}

FeaturizeResult run_featurize(const config::PipelineConfig& cfg, std::ostream& log) {
    ensure_output_dir(cfg);
    config::Paths paths = resolve_paths(cfg);
    std::vector<cohort::TreatmentPlan> plans = cohort::load_plans_jsonl(paths.plans);
    std::vector<cohort::EmrRow> emr = cohort::load_emr_csv(paths.emr);
    std::vector<cohort::ApprovedDrug> approved = cohort::load_approved_drugs(paths.drugs);
    std::vector<ExtractionLine> lines = load_extractions_jsonl(output_path(cfg, "extractions.jsonl"));

    std::map<std::string, const cohort::TreatmentPlan*> plan_by_id;
    for (const auto& p : plans) plan_by_id[p.patient_id] = &p;
    std::map<std::string, const cohort::EmrRow*> emr_by_id;
    for (const auto& e : emr) emr_by_id[e.patient_id] = &e;

    struct PatientNotes {
        std::vector<std::pair<util::Date, extraction::PhenotypeRecord>> phenotypes;
        std::vector<cohort::DatedOutcome> outcomes;
        std::optional<util::Date> last_note;
    };
    std::map<std::string, PatientNotes> notes_by_id;
    for (const auto& el : lines) {
        std::optional<util::Date> parsed_date = util::parse_date(el.note_date);
        if (!parsed_date)
            throw_data("extraction record for note '" + el.note_id + "' has invalid note_date '" + el.note_date +
                       "'");
        util::Date d = *parsed_date;
        PatientNotes& pn = notes_by_id[el.patient_id];
        if (el.target == Target::phenotype)
            pn.phenotypes.emplace_back(d, std::get<extraction::PhenotypeRecord>(el.result.record));
        else
            pn.outcomes.push_back({d, std::get<extraction::OutcomeRecord>(el.result.record)});
        if (!pn.last_note || *pn.last_note < d) pn.last_note = d;
    }

    // the cohort is the id intersection; ids missing from any input are orphans
    std::set<std::string> all_ids;
    for (const auto& [id, p] : plan_by_id) all_ids.insert(id);
    for (const auto& [id, e] : emr_by_id) all_ids.insert(id);
    for (const auto& [id, n] : notes_by_id) all_ids.insert(id);
    std::vector<std::string> cohort_ids, orphans;
    for (const std::string& id : all_ids) {
        if (plan_by_id.count(id) && emr_by_id.count(id) && notes_by_id.count(id))
            cohort_ids.push_back(id);
        else
            orphans.push_back(id);
    }
    if (cohort_ids.empty())
        throw_data("AlignmentError: no patient id appears in all of EMR, plans, and extractions");
    if (!orphans.empty()) {
        std::string listed;
        for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) listed += (i ? ", " : "") + orphans[i];
        if (orphans.size() > 20) listed += ", ... (" + std::to_string(orphans.size()) + " total)";
        if (!cfg.lenient)
            throw_data("AlignmentError: patient ids missing from at least one input: " + listed);
        log << "[featurize] dropping unaligned patient ids: " << listed << "\n";
    }

    std::vector<std::string> warnings;
    std::vector<cohort::TreatmentPlan> cohort_plans;
    for (const std::string& id : cohort_ids) cohort_plans.push_back(*plan_by_id.at(id));
    cohort::RegimenCatalog catalog =
        cohort::build_regimen_catalog(cohort_plans, approved, cfg.cohort.support_threshold, &warnings);
    cohort::FeatureSchema schema = cohort::FeatureSchema::build(catalog);

    std::vector<cohort::FeatureRow> rows;
    std::vector<data::SurvivalRecord> records;
    for (const std::string& id : cohort_ids) {
        const cohort::TreatmentPlan& plan = *plan_by_id.at(id);
        const PatientNotes& pn = notes_by_id.at(id);
        cohort::FailureCall failure = cohort::derive_failure(pn.outcomes, plan);
        records.push_back(cohort::time_to_event(plan, failure.event_date, *pn.last_note, &warnings));
        extraction::PhenotypeRecord phenotype = cohort::merge_phenotypes(pn.phenotypes);
        rows.push_back(cohort::assemble_features(*emr_by_id.at(id), phenotype, plan, catalog, schema, &warnings,
                                                 &warnings));
    }

    for (const std::string& w : warnings) log << "[featurize] warning: " << w << "\n";

    FeaturizeResult res;
    res.n_rows = rows.size();
    res.n_warnings = warnings.size();
    res.features_csv = output_path(cfg, "features.csv");
    res.survival_jsonl = output_path(cfg, "survival.jsonl");
    res.dictionary_json = output_path(cfg, "data_dictionary.json");
    res.summary_json = output_path(cfg, "cohort_summary.json");
    cohort::write_feature_csv(res.features_csv, schema, rows);
    cohort::write_survival_jsonl(res.survival_jsonl, records);
    util::write_file(res.dictionary_json, cohort::data_dictionary(schema, catalog).dump(2) + "\n");
    res.summary = cohort::cohort_summary(records, rows, schema);
    std::string summary_text = cohort::summary_to_json(res.summary).dump(2) + "\n";
    util::write_file(res.summary_json, summary_text);
    log << summary_text;
    log << "[featurize] " << res.n_rows << " patients, " << schema.columns.size() << " feature columns -> "
        << res.features_csv << "\n";
    return res;
}

HoldoutSplit holdout_split(std::size_t n, std::uint64_t seed, double holdout_fraction) {
    if (n < 2) throw_data("EmptyInput: need at least 2 rows for a holdout split");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    util::Rng rng(util::mix64(seed ^ 0x484f4c444f5554ULL));
    rng.shuffle(idx);
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * holdout_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    HoldoutSplit split;
    split.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

TrainResult run_train(const config::PipelineConfig& cfg, std::ostream& log) {
    ensure_output_dir(cfg);
    auto [ds, records] = load_training_inputs(cfg);
    HoldoutSplit split = holdout_split(ds.n_rows(), cfg.survival.seed, cfg.survival.holdout_fraction);
    data::Dataset train_ds = subset_dataset(ds, split.train);
    std::vector<data::SurvivalRecord> train_records = subset_records(records, split.train);
    survival::SurvivalForestModel model =
        survival::fit_forest(train_ds, train_records, cfg.survival.forest(cfg.workers));

    TrainResult res;
    res.model_path = output_path(cfg, "model.json");
    res.n_train = split.train.size();
    res.n_test = split.test.size();
    res.n_features = ds.n_features();
    util::write_file(res.model_path, survival::serialize_model(model));
    log << "[train] " << res.n_train << " train / " << res.n_test << " held out, " << res.n_features
        << " features, " << model.trees.size() << " trees -> " << res.model_path << "\n";
    try {
        double c = survival::concordance_index(survival::predict_risks(model, train_ds), train_records);
        log << "[train] training-set C-index " << fmt(c) << "\n";
    } catch (const Error&) {
        // no comparable pairs in a degenerate training set; the model is still usable
    }
    return res;
}

EvaluateResult run_evaluate(const config::PipelineConfig& cfg, std::ostream& log) {
    ensure_output_dir(cfg);
    survival::SurvivalForestModel model =
        survival::deserialize_model(util::read_file(output_path(cfg, "model.json")));
    auto [ds, records] = load_training_inputs(cfg);
    HoldoutSplit split = holdout_split(ds.n_rows(), cfg.survival.seed, cfg.survival.holdout_fraction);
    data::Dataset test_ds = subset_dataset(ds, split.test);
    std::vector<data::SurvivalRecord> test_records = subset_records(records, split.test);

    std::vector<double> risks = survival::predict_risks(model, test_ds);
    double c_index = survival::concordance_index(risks, test_records);
    const std::vector<double>& grid = cfg.survival.time_grid.empty() ? model.grid : cfg.survival.time_grid;
    survival::SweepResult sweep =
        survival::sweep_time_points(model, test_ds, test_records, grid, cfg.survival.threshold);
    std::vector<int> predictions =
        survival::classify_at(model, test_ds, sweep.t_star, cfg.survival.threshold);

    std::vector<int> preds, labels;
    std::vector<double> probs;
    std::size_t n_excluded = 0;
    for (std::size_t i = 0; i < test_records.size(); ++i) {
        survival::HorizonLabel hl = survival::label_at(test_records[i], sweep.t_star);
        if (!hl.included) {
            ++n_excluded;
            continue;
        }
        preds.push_back(predictions[i]);
        labels.push_back(hl.label);
        probs.push_back(1.0 - survival::predict_survival(model, test_ds.row(i)).at(sweep.t_star));
    }
    metrics::ConfusionCounts confusion = metrics::confusion_from_lists(preds, labels);
    metrics::MetricSet ms = metrics::metrics_from_confusion(confusion);
    metrics::F1PerClass f1 = metrics::f1_per_class(preds, labels);

    report::EvalReport r;
    r.c_index = c_index;
    r.accuracy = ms.accuracy;
    r.precision = ms.precision;
    r.recall = ms.recall;
    r.f1_pos = f1.f1_pos;
    r.f1_neg = f1.f1_neg;
    r.f1_pos_degenerate = f1.pos_degenerate;
    r.f1_neg_degenerate = f1.neg_degenerate;
    r.time_point_days = std::lround(sweep.t_star);
    r.threshold = cfg.survival.threshold;
    r.confusion = confusion;
    r.n_excluded = n_excluded;
    r.calibration_bins = survival::calibration_curve(probs, labels);
    r.feature_importances = survival::permutation_importance(model, test_ds, test_records,
                                                             cfg.survival.importance_repeats, cfg.survival.seed);
    r.protocol.seed = cfg.survival.seed;
    r.protocol.holdout_fraction = cfg.survival.holdout_fraction;
    r.protocol.n_train = split.train.size();
    r.protocol.n_test = split.test.size();
    report::validate(r);

    EvaluateResult res;
    res.report = r;
    res.sweep = sweep;
    res.report_json = output_path(cfg, "eval_report.json");
    util::write_file(res.report_json, report::report_to_json(r));

    // mean predicted survival per observed failure state
    std::vector<report::LabeledCurve> curves;
    for (bool event : {true, false}) {
        std::vector<double> mean(model.grid.size(), 0.0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < test_records.size(); ++i) {
            if (test_records[i].event != event) continue;
            survival::SurvivalFunction s = survival::predict_survival(model, test_ds.row(i));
            for (std::size_t g = 0; g < mean.size(); ++g) mean[g] += s.probabilities[g];
            ++count;
        }
        if (count == 0) continue;
        for (double& v : mean) v /= static_cast<double>(count);
        curves.push_back({event ? "failure" : "no failure", {model.grid, std::move(mean)}});
    }
    res.curves_csv = output_path(cfg, "survival_curves.csv");
    res.curves_svg = output_path(cfg, "survival_curves.svg");
    res.calibration_csv = output_path(cfg, "calibration.csv");
    res.calibration_svg = output_path(cfg, "calibration.svg");
    util::write_file(res.curves_csv, report::curves_csv(curves));
    util::write_file(res.curves_svg, report::curves_svg(curves, "Mean predicted survival by failure state"));
    util::write_file(res.calibration_csv, report::calibration_csv(r.calibration_bins));
    util::write_file(res.calibration_svg, report::calibration_svg(r.calibration_bins, "Calibration"));

    log << "[evaluate] C-index " << fmt(c_index) << ", t* " << r.time_point_days << " days, accuracy "
        << fmt_opt(r.accuracy) << ", f1+ " << fmt(r.f1_pos) << ", f1- " << fmt(r.f1_neg) << ", excluded "
        << n_excluded << "\n";
    log << "[evaluate] report -> " << res.report_json << "\n";
    return res;
}

void run_report(const config::PipelineConfig& cfg, std::ostream& log) {
    std::string path = output_path(cfg, "eval_report.json");
    if (!fs::exists(path)) throw_data("eval report not found at '" + path + "'; run evaluate first");
    json j = json::parse(util::read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw_data("eval report at '" + path + "' is not a JSON object");

    auto num = [&](const char* key) -> std::string {
        if (!j.contains(key) || j.at(key).is_null()) return "n/a";
        return fmt(j.at(key).get<double>());
    };
    log << "Evaluation report (" << path << ")\n";
    log << "  C-index:        " << num("c_index") << "\n";
    log << "  horizon:        " << j.value("time_point_days", 0L) << " days at threshold "
        << fmt(j.value("threshold", 0.0), 2) << "\n";
    log << "  accuracy:       " << num("accuracy") << "\n";
    log << "  precision:      " << num("precision") << "\n";
    log << "  recall:         " << num("recall") << "\n";
    log << "  f1 (failure):   " << num("f1_pos") << "\n";
    log << "  f1 (survival):  " << num("f1_neg") << "\n";
    if (j.contains("confusion")) {
        const json& c = j.at("confusion");
        log << "  confusion:      tp=" << c.value("tp", 0L) << " fp=" << c.value("fp", 0L)
            << " tn=" << c.value("tn", 0L) << " fn=" << c.value("fn", 0L)
            << " excluded=" << j.value("n_excluded", 0L) << "\n";
    }
    if (j.contains("protocol")) {
        const json& p = j.at("protocol");
        log << "  protocol:       " << p.value("split", std::string("?")) << ", seed "
            << p.value("seed", std::string("?")) << ", train " << p.value("n_train", 0L) << ", test "
            << p.value("n_test", 0L) << "\n";
    }
    if (j.contains("calibration_bins") && j.at("calibration_bins").is_array()) {
        log << "  calibration (bin, count, mean predicted, observed):\n";
        for (const json& b : j.at("calibration_bins")) {
            log << "    [" << fmt(b.value("lo", 0.0), 1) << ", " << fmt(b.value("hi", 0.0), 1) << "] n="
                << b.value("count", 0L);
            if (b.contains("mean_predicted") && !b.at("mean_predicted").is_null())
                log << " pred=" << fmt(b.at("mean_predicted").get<double>())
                    << " obs=" << fmt(b.at("observed_fraction").get<double>());
            log << "\n";
        }
    }
    if (j.contains("feature_importances") && j.at("feature_importances").is_array()) {
        log << "  top features by permutation importance:\n";
        std::size_t shown = 0;
        for (const json& f : j.at("feature_importances")) {
            if (++shown > 10) break;
            log << "    " << f.value("feature", std::string("?")) << ": "
                << fmt(f.value("importance", 0.0), 4) << "\n";
        }
    }
}

}  // namespace oncosurv::pipeline
