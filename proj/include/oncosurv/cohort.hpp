#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oncosurv/dataset.hpp"
#include "oncosurv/schema.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::cohort {

struct DrugDose {
    std::string gpi8;  // exactly 8 characters
    std::string name;
    double total_dose = 0.0;
    std::string unit;  // mg/g/mcg normalize; other units excluded with a warning
    int weeks = 1;     // positive
};

struct TreatmentPlan {
    std::string patient_id;
    util::Date plan_start;
    std::optional<util::Date> plan_end;  // >= plan_start when present
    std::vector<DrugDose> drugs;         // non-empty
};

// JSONL, one plan per line:
// {"patient_id", "plan_start", "plan_end", "drugs": [{"gpi8","name","total_dose","unit","weeks"}]}
// Keeps the first recorded plan per patient (earliest plan_start, file order on ties).
std::vector<TreatmentPlan> load_plans_jsonl(const std::string& path);
std::vector<TreatmentPlan> first_plan_per_patient(std::vector<TreatmentPlan> plans);

struct ApprovedDrug {
    std::string gpi;  // 1..8 character prefix
    std::string name;
};

// CSV with header gpi8,name.
std::vector<ApprovedDrug> load_approved_drugs(const std::string& path);

struct EmrRow {
    std::string patient_id;
    double age = 0.0;
    std::string gender;  // female | male | other
    std::optional<double> bsa_m2;
    std::optional<double> serum_creatinine;
    std::optional<double> readmission_score;
    std::vector<std::string> icd10_codes;
    std::string er;  // "", positive, negative, unknown ("" = not recorded)
    std::string pr;
    std::string her2;
};

// CSV header: patient_id,age,gender,bsa_m2,serum_creatinine_mg_dl,
//             readmission_score,icd10_codes,er,pr,her2
// icd10_codes are ';'-separated.
std::vector<EmrRow> load_emr_csv(const std::string& path);

struct DatedOutcome {
    util::Date note_date;
    extraction::OutcomeRecord record;
};

struct FailureCall {
    bool event = false;
    std::optional<util::Date> event_date;
};

// Treatment failure: (progressed and discontinued) or (adverse_effects and
// discontinued_or_modified) or died or hospice. The event date is the
// earliest qualifying note date, except a death/hospice record with its own
// event_date which contributes that date instead.
FailureCall derive_failure(const std::vector<DatedOutcome>& outcomes, const TreatmentPlan& plan);

// Event present: days plan_start -> event_date; otherwise censored at
// last_observation. Zero durations clamp to 1 day with a warning; an event
// before plan_start is a "NegativeDuration" data error.
data::SurvivalRecord time_to_event(const TreatmentPlan& plan, const std::optional<util::Date>& event_date,
                                   const util::Date& last_observation,
                                   std::vector<std::string>* warnings = nullptr);

struct RegimenCatalog {
    struct Combination {
        std::vector<std::string> drugs;  // sorted approved names
        std::size_t support = 0;         // distinct patients
    };

    std::vector<ApprovedDrug> approved;
    std::vector<std::string> drug_names;     // observed approved drugs, sorted
    std::vector<Combination> combinations;   // support >= threshold, sorted by name
    int support_threshold = 20;

    // Longest approved prefix matching the full gpi8 code.
    std::optional<std::string> match(const std::string& gpi8) const;
    static std::string combo_name(const std::vector<std::string>& drugs);  // "a+b+c"
};

// Counts distinct-patient support per combination of approved drugs; drugs
// without an approved match are logged and land in the drug__other flag only.
RegimenCatalog build_regimen_catalog(const std::vector<TreatmentPlan>& plans,
                                     const std::vector<ApprovedDrug>& approved, int support_threshold,
                                     std::vector<std::string>* warnings = nullptr);

// Ordinal mapping tables; decode(encode(x)) = x for every listed value.
struct EncodingTable {
    std::string name;
    std::vector<std::pair<std::string, double>> codes;

    std::optional<double> encode(const std::string& value) const;
    std::optional<std::string> decode(double code) const;
};

const EncodingTable& t_stage_encoding();      // T0..T4, Tis; TX missing
const EncodingTable& n_stage_encoding();      // N0..N3; NX missing
const EncodingTable& m_stage_encoding();      // M0, M1; MX missing
const EncodingTable& stage_group_encoding();  // 0..IV incl. substages
const EncodingTable& grade_encoding();        // G1..G4; GX missing
const EncodingTable& biomarker_encoding();    // positive 1, negative 0; unknown missing
const EncodingTable& gender_encoding();       // female 0, male 1, other 2

// Column name -> ICD-10 prefixes, fixed order.
const std::vector<std::pair<std::string, std::vector<std::string>>>& comorbidity_groups();

struct FeatureSchema {
    std::vector<std::string> columns;

    static FeatureSchema build(const RegimenCatalog& catalog);
    std::size_t index_of(const std::string& column) const;  // throws on unknown
};

struct FeatureRow {
    std::string patient_id;
    std::vector<double> values;  // aligned to FeatureSchema::columns
};

// Field-wise merge in note-date order: first non-null (biomarkers: first
// definite) value wins.
extraction::PhenotypeRecord merge_phenotypes(
    std::vector<std::pair<util::Date, extraction::PhenotypeRecord>> dated);

// EMR wins over extraction when both state a definite biomarker value;
// conflicts are logged, never silently resolved.
FeatureRow assemble_features(const EmrRow& emr, const extraction::PhenotypeRecord& phenotype,
                             const TreatmentPlan& plan, const RegimenCatalog& catalog, const FeatureSchema& schema,
                             std::vector<std::string>* conflicts = nullptr,
                             std::vector<std::string>* warnings = nullptr);

struct CohortSummary {
    struct RegimenStat {
        std::string name;
        std::size_t n = 0;
        double failure_pct = 0.0;
    };
    std::size_t n = 0;
    double failure_prevalence = 0.0;
    std::vector<RegimenStat> regimens;
};

CohortSummary cohort_summary(const std::vector<data::SurvivalRecord>& records,
                             const std::vector<FeatureRow>& rows, const FeatureSchema& schema);
nlohmann::json summary_to_json(const CohortSummary& s);

void write_feature_csv(const std::string& path, const FeatureSchema& schema, const std::vector<FeatureRow>& rows);
data::Dataset load_feature_csv(const std::string& path);

void write_survival_jsonl(const std::string& path, const std::vector<data::SurvivalRecord>& records);
std::vector<data::SurvivalRecord> load_survival_jsonl(const std::string& path);

nlohmann::json data_dictionary(const FeatureSchema& schema, const RegimenCatalog& catalog);

}  // namespace oncosurv::cohort
