#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "oncosurv/cohort.hpp"
#include "oncosurv/errors.hpp"
#include "oncosurv/util.hpp"

using namespace oncosurv;
using namespace oncosurv::cohort;
using util::Date;

namespace {

TreatmentPlan plan_for(const std::string& pid, Date start) {
    TreatmentPlan p;
    p.patient_id = pid;
    p.plan_start = start;
    p.drugs = {{"21400030", "paclitaxel", 1600.0, "mg", 10}};
    return p;
}

DatedOutcome outcome_on(Date d, bool prog, bool disc, bool adverse, bool modified, bool died, bool hospice = false) {
    DatedOutcome o;
    o.note_date = d;
    o.record.progression.progressed = prog;
    o.record.progression.discontinued = disc;
    o.record.toxicity.adverse_effects = adverse;
    o.record.toxicity.discontinued_or_modified = modified;
    o.record.death_hospice.died = died;
    o.record.death_hospice.hospice = hospice;
    return o;
}

}  // namespace

TEST_CASE("failure predicate matches its truth table over all 32 combinations") {
    auto plan = plan_for("P1", {2020, 1, 1});
    for (int bits = 0; bits < 32; ++bits) {
        bool prog = bits & 1;
        bool disc = bits & 2;
        bool adverse = bits & 4;
        bool modified = bits & 8;
        bool died = bits & 16;
        bool expected = (prog && disc) || (adverse && modified) || died;

        auto call = derive_failure({outcome_on({2020, 3, 1}, prog, disc, adverse, modified, died)}, plan);
        CHECK_MESSAGE(call.event == expected, "died-combination bits=", bits);

        // hospice substituted for died must behave identically
        auto hospice_call =
            derive_failure({outcome_on({2020, 3, 1}, prog, disc, adverse, modified, false, died)}, plan);
        CHECK_MESSAGE(hospice_call.event == expected, "hospice-combination bits=", bits);
    }
}

TEST_CASE("failure date is the earliest qualifying note") {
    auto plan = plan_for("P1", {2020, 1, 1});
    std::vector<DatedOutcome> outcomes = {
        outcome_on({2020, 2, 1}, true, false, false, false, false),   // progression without discontinuation
        outcome_on({2020, 5, 1}, true, true, false, false, false),    // qualifies
        outcome_on({2020, 3, 1}, false, false, true, true, false),    // qualifies earlier
    };
    auto call = derive_failure(outcomes, plan);
    CHECK(call.event);
    CHECK(*call.event_date == Date{2020, 3, 1});
}

TEST_CASE("a dated death record overrides its note date") {
    auto plan = plan_for("P1", {2020, 1, 1});
    auto o = outcome_on({2020, 6, 1}, false, false, false, false, true);
    o.record.death_hospice.event_date = "2020-05-20";
    auto call = derive_failure({o}, plan);
    CHECK(call.event);
    CHECK(*call.event_date == Date{2020, 5, 20});
}

TEST_CASE("outcome notes predating the plan are rejected") {
    auto plan = plan_for("P1", {2020, 6, 1});
    CHECK_THROWS_AS(derive_failure({outcome_on({2020, 1, 1}, true, true, false, false, false)}, plan),
                    oncosurv::Error);
}

TEST_CASE("time to event spans 431 days on the worked example") {
    auto plan = plan_for("P1", {2020, 1, 1});
    auto rec = time_to_event(plan, Date{2021, 3, 7}, Date{2021, 6, 1});
    CHECK(rec.time_days == 431);
    CHECK(rec.event);
}

TEST_CASE("patients without an event censor at last observation") {
    auto plan = plan_for("P1", {2020, 1, 1});
    auto rec = time_to_event(plan, std::nullopt, Date{2020, 12, 31});
    CHECK_FALSE(rec.event);
    CHECK(rec.time_days == 365);
}

TEST_CASE("zero-day durations clamp to one day with a warning") {
    auto plan = plan_for("P1", {2020, 1, 1});
    std::vector<std::string> warnings;
    auto rec = time_to_event(plan, Date{2020, 1, 1}, Date{2020, 1, 1}, &warnings);
    CHECK(rec.time_days == 1);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("clamped") != std::string::npos);
}

TEST_CASE("an event before plan start is a NegativeDuration error") {
    auto plan = plan_for("P1", {2020, 6, 1});
    CHECK_THROWS_WITH_AS(time_to_event(plan, Date{2020, 5, 1}, Date{2020, 12, 1}),
                         doctest::Contains("NegativeDuration"), oncosurv::Error);
}

TEST_CASE("regimen catalog applies the patient support threshold") {
    std::vector<ApprovedDrug> approved = {{"21400030", "paclitaxel"}, {"21200050", "carboplatin"}};
    std::vector<TreatmentPlan> plans;
    // 25 patients on paclitaxel alone, 3 on paclitaxel+carboplatin
    for (int i = 0; i < 28; ++i) {
        TreatmentPlan p = plan_for("P" + std::to_string(i), {2020, 1, 1});
        if (i >= 25) p.drugs.push_back({"21200050", "carboplatin", 450.0, "mg", 10});
        plans.push_back(p);
    }
    auto catalog = build_regimen_catalog(plans, approved, 20);
    REQUIRE(catalog.combinations.size() == 1);
    CHECK(catalog.combinations[0].drugs == std::vector<std::string>{"paclitaxel"});
    CHECK(catalog.combinations[0].support == 25);
    CHECK(catalog.drug_names == std::vector<std::string>{"carboplatin", "paclitaxel"});
}

TEST_CASE("unapproved drugs produce an UnknownDrug warning and the other flag") {
    std::vector<ApprovedDrug> approved = {{"21400030", "paclitaxel"}};
    TreatmentPlan p = plan_for("P1", {2020, 1, 1});
    p.drugs.push_back({"99999999", "investigational agent", 100.0, "mg", 10});
    std::vector<std::string> warnings;
    auto catalog = build_regimen_catalog({p}, approved, 1);
    build_regimen_catalog({p}, approved, 1, &warnings);
    REQUIRE_FALSE(warnings.empty());
    CHECK(warnings[0].find("UnknownDrug") != std::string::npos);

    auto schema = FeatureSchema::build(catalog);
    auto row = assemble_features({"P1", 60.0, "female"}, extraction::empty_phenotype(), p, catalog, schema);
    CHECK(row.values[schema.index_of("drug__other")] == 1.0);
    CHECK(row.values[schema.index_of("drug__paclitaxel")] == 1.0);
}

TEST_CASE("gpi prefixes match longest-first") {
    RegimenCatalog catalog;
    catalog.approved = {{"214", "taxane group"}, {"21400030", "paclitaxel"}};
    CHECK(*catalog.match("21400030") == "paclitaxel");
    CHECK(*catalog.match("21400099") == "taxane group");
    CHECK_FALSE(catalog.match("99999999").has_value());
}

TEST_CASE("encoding tables round-trip every listed value") {
    for (const auto* table : {&t_stage_encoding(), &n_stage_encoding(), &m_stage_encoding(),
                              &stage_group_encoding(), &grade_encoding(), &biomarker_encoding(),
                              &gender_encoding()}) {
        for (const auto& [value, code] : table->codes) {
            auto encoded = table->encode(value);
            REQUIRE(encoded.has_value());
            CHECK(*encoded == code);
            auto decoded = table->decode(*encoded);
            REQUIRE(decoded.has_value());
            CHECK(*decoded == value);
        }
        CHECK_FALSE(table->encode("definitely-not-a-value").has_value());
    }
}

TEST_CASE("phenotype merge keeps the earliest stated value per field") {
    extraction::PhenotypeRecord early;
    early.t_stage = "T2";
    early.er = "unknown";
    extraction::PhenotypeRecord late;
    late.t_stage = "T3";
    late.grade = "G2";
    late.er = "positive";

    auto merged = merge_phenotypes({{Date{2020, 3, 1}, late}, {Date{2020, 1, 1}, early}});
    CHECK(merged.t_stage == "T2");   // earliest non-null wins
    CHECK(merged.grade == "G2");     // filled from the later note
    CHECK(merged.er == "positive");  // biomarkers: first definite value wins
}

TEST_CASE("assemble_features produces a fully determined golden row") {
    std::vector<ApprovedDrug> approved = {{"21400030", "paclitaxel"}};
    std::vector<TreatmentPlan> cohort_plans;
    for (int i = 0; i < 25; ++i) cohort_plans.push_back(plan_for("Q" + std::to_string(i), {2020, 1, 1}));
    auto catalog = build_regimen_catalog(cohort_plans, approved, 20);
    auto schema = FeatureSchema::build(catalog);
    TreatmentPlan plan = plan_for("P7", {2020, 1, 1});  // 1600 mg over 10 weeks

    EmrRow emr;
    emr.patient_id = "P7";
    emr.age = 61.0;
    emr.gender = "female";
    emr.bsa_m2 = 1.8;
    emr.icd10_codes = {"E11.9", "I10"};
    emr.er = "negative";

    extraction::PhenotypeRecord ph;
    ph.t_stage = "T2";
    ph.stage_group = "IIB";
    ph.grade = "G3";
    ph.ecog = 1;
    ph.er = "positive";  // conflicts with EMR
    ph.her2 = "positive";

    std::vector<std::string> conflicts;
    auto row = assemble_features(emr, ph, plan, catalog, schema, &conflicts);

    auto val = [&](const std::string& col) { return row.values[schema.index_of(col)]; };
    CHECK(val("age") == 61.0);
    CHECK(val("gender") == 0.0);
    CHECK(val("bsa_m2") == 1.8);
    CHECK(val("bsa_m2__missing") == 0.0);
    CHECK(val("serum_creatinine_mg_dl__missing") == 1.0);
    CHECK(val("comorb_diabetes") == 1.0);
    CHECK(val("comorb_hypertension") == 1.0);
    CHECK(val("comorb_chf") == 0.0);
    CHECK(val("er") == 0.0);  // EMR wins the conflict
    CHECK(val("her2") == 1.0);
    CHECK(val("ecog") == 1.0);
    CHECK(val("karnofsky__missing") == 1.0);
    CHECK(val("t_stage") == 3.0);  // T0=0, Tis=1, T1=2, T2=3, ...
    CHECK(val("stage_group") == 6.0);
    CHECK(val("grade") == 3.0);
    CHECK(val("dose_per_week") == doctest::Approx(160.0));
    CHECK(val("weeks") == 10.0);
    CHECK(val("regimen__paclitaxel") == 1.0);
    CHECK(val("drug__paclitaxel") == 1.0);
    CHECK(val("drug__other") == 0.0);

    REQUIRE(conflicts.size() == 1);
    CHECK(conflicts[0].find("ConflictingValues") != std::string::npos);
}

TEST_CASE("gram doses normalize to milligrams") {
    std::vector<ApprovedDrug> approved = {{"21100020", "cyclophosphamide"}};
    TreatmentPlan plan;
    plan.patient_id = "P1";
    plan.plan_start = {2020, 1, 1};
    plan.drugs = {{"21100020", "cyclophosphamide", 12.0, "g", 12}};
    auto catalog = build_regimen_catalog({plan}, approved, 1);
    auto schema = FeatureSchema::build(catalog);
    auto row = assemble_features({"P1", 50.0, "male"}, extraction::empty_phenotype(), plan, catalog, schema);
    CHECK(row.values[schema.index_of("dose_per_week")] == doctest::Approx(1000.0));
}

TEST_CASE("unnormalizable units are excluded with a warning") {
    std::vector<ApprovedDrug> approved = {{"21400030", "paclitaxel"}};
    TreatmentPlan plan = plan_for("P1", {2020, 1, 1});
    plan.drugs.push_back({"21400030", "paclitaxel", 4.0, "units", 4});
    auto catalog = build_regimen_catalog({plan}, approved, 1);
    auto schema = FeatureSchema::build(catalog);
    std::vector<std::string> warnings;
    auto row = assemble_features({"P1", 50.0, "male"}, extraction::empty_phenotype(), plan, catalog, schema,
                                 nullptr, &warnings);
    CHECK(row.values[schema.index_of("dose_per_week")] == doctest::Approx(160.0));  // mg line only
    REQUIRE_FALSE(warnings.empty());
    CHECK(warnings[0].find("units") != std::string::npos);
}

TEST_CASE("plans loader keeps the first plan per patient") {
    std::string path = "test_plans_tmp.jsonl";
    {
        std::ofstream out(path);
        out << R"({"patient_id":"P1","plan_start":"2020-02-01","plan_end":null,"drugs":[{"gpi8":"21400030","name":"paclitaxel","total_dose":800.0,"unit":"mg","weeks":5}]})"
            << "\n";
        out << R"({"patient_id":"P1","plan_start":"2020-01-01","plan_end":"2020-03-01","drugs":[{"gpi8":"21200050","name":"carboplatin","total_dose":450.0,"unit":"mg","weeks":6}]})"
            << "\n";
    }
    auto plans = load_plans_jsonl(path);
    REQUIRE(plans.size() == 1);
    CHECK(plans[0].plan_start == Date{2020, 1, 1});
    CHECK(plans[0].drugs[0].name == "carboplatin");
    std::remove(path.c_str());
}

TEST_CASE("feature csv and survival jsonl round-trip") {
    std::vector<ApprovedDrug> approved = {{"21400030", "paclitaxel"}};
    TreatmentPlan plan = plan_for("P1", {2020, 1, 1});
    auto catalog = build_regimen_catalog({plan}, approved, 1);
    auto schema = FeatureSchema::build(catalog);
    auto row = assemble_features({"P1", 47.5, "other"}, extraction::empty_phenotype(), plan, catalog, schema);

    std::string fpath = "test_features_tmp.csv";
    write_feature_csv(fpath, schema, {row});
    auto ds = load_feature_csv(fpath);
    CHECK(ds.feature_names == schema.columns);
    REQUIRE(ds.n_rows() == 1);
    CHECK(ds.row_ids[0] == "P1");
    CHECK(ds.row(0) == row.values);
    std::remove(fpath.c_str());

    std::string spath = "test_survival_tmp.jsonl";
    std::vector<data::SurvivalRecord> recs = {{"P1", 431, true}, {"P2", 200, false}};
    write_survival_jsonl(spath, recs);
    auto loaded = load_survival_jsonl(spath);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].patient_id == "P1");
    CHECK(loaded[0].time_days == 431);
    CHECK(loaded[0].event);
    CHECK_FALSE(loaded[1].event);
    std::remove(spath.c_str());
}

TEST_CASE("cohort summary reports prevalence and per-regimen failure") {
    std::vector<ApprovedDrug> approved = {{"21400030", "paclitaxel"}};
    std::vector<TreatmentPlan> cohort_plans;
    for (int i = 0; i < 25; ++i) cohort_plans.push_back(plan_for("Q" + std::to_string(i), {2020, 1, 1}));
    auto catalog = build_regimen_catalog(cohort_plans, approved, 20);
    auto schema = FeatureSchema::build(catalog);

    std::vector<FeatureRow> rows;
    std::vector<data::SurvivalRecord> recs;
    for (int i = 0; i < 4; ++i) {
        TreatmentPlan p = plan_for("P" + std::to_string(i), {2020, 1, 1});
        rows.push_back(assemble_features({"P" + std::to_string(i), 50.0, "female"}, extraction::empty_phenotype(),
                                         p, catalog, schema));
        recs.push_back({"P" + std::to_string(i), 100 + i, i < 3});
    }
    auto s = cohort_summary(recs, rows, schema);
    CHECK(s.n == 4);
    CHECK(s.failure_prevalence == doctest::Approx(0.75));
    REQUIRE(s.regimens.size() == 1);
    CHECK(s.regimens[0].name == "paclitaxel");
    CHECK(s.regimens[0].n == 4);
    CHECK(s.regimens[0].failure_pct == doctest::Approx(75.0));
}
