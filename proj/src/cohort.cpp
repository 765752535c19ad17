#include "oncosurv/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "oncosurv/csv.hpp"
#include "oncosurv/errors.hpp"

namespace oncosurv::cohort {

using nlohmann::json;

namespace {

double parse_double_strict(const std::string& s, const std::string& what) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v)) throw_data(what + ": not a number: '" + s + "'");
    return v;
}

util::Date parse_date_strict(const std::string& s, const std::string& what) {
    auto d = util::parse_date(s);
    if (!d) throw_data(what + ": not a YYYY-MM-DD date: '" + s + "'");
    return *d;
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& what) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw_data(what + ": unknown key '" + it.key() + "'");
    }
}

}  // namespace

std::vector<TreatmentPlan> load_plans_jsonl(const std::string& path) {
    std::string content = util::read_file(path);
    std::vector<TreatmentPlan> plans;
    std::size_t line_no = 0;
    std::istringstream in(content);
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        std::string where = path + " line " + std::to_string(line_no);
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw_data(where + ": not a JSON object");
        reject_unknown_keys(j, {"patient_id", "plan_start", "plan_end", "drugs"}, where);
        for (const char* key : {"patient_id", "plan_start", "plan_end", "drugs"})
            if (!j.contains(key)) throw_data(where + ": missing key '" + std::string(key) + "'");
        TreatmentPlan plan;
        if (!j["patient_id"].is_string() || j["patient_id"].get<std::string>().empty())
            throw_data(where + ": patient_id must be a non-empty string");
        plan.patient_id = j["patient_id"].get<std::string>();
        if (!j["plan_start"].is_string()) throw_data(where + ": plan_start must be a date string");
        plan.plan_start = parse_date_strict(j["plan_start"].get<std::string>(), where + " plan_start");
        if (!j["plan_end"].is_null()) {
            if (!j["plan_end"].is_string()) throw_data(where + ": plan_end must be a date string or null");
            plan.plan_end = parse_date_strict(j["plan_end"].get<std::string>(), where + " plan_end");
            if (*plan.plan_end < plan.plan_start) throw_data(where + ": plan_end precedes plan_start");
        }
        if (!j["drugs"].is_array() || j["drugs"].empty()) throw_data(where + ": drugs must be a non-empty array");
        for (const json& dj : j["drugs"]) {
            if (!dj.is_object()) throw_data(where + ": drug entries must be objects");
            reject_unknown_keys(dj, {"gpi8", "name", "total_dose", "unit", "weeks"}, where);
            for (const char* key : {"gpi8", "name", "total_dose", "unit", "weeks"})
                if (!dj.contains(key)) throw_data(where + ": drug missing key '" + std::string(key) + "'");
            DrugDose d;
            if (!dj["gpi8"].is_string() || dj["gpi8"].get<std::string>().size() != 8)
                throw_data(where + ": gpi8 must be an 8-character string");
            d.gpi8 = dj["gpi8"].get<std::string>();
            if (!dj["name"].is_string() || dj["name"].get<std::string>().empty())
                throw_data(where + ": drug name must be a non-empty string");
            d.name = util::to_lower(dj["name"].get<std::string>());
            if (!dj["total_dose"].is_number() || dj["total_dose"].get<double>() < 0.0 ||
                !std::isfinite(dj["total_dose"].get<double>()))
                throw_data(where + ": total_dose must be a non-negative number");
            d.total_dose = dj["total_dose"].get<double>();
            if (!dj["unit"].is_string() || dj["unit"].get<std::string>().empty())
                throw_data(where + ": unit must be a non-empty string");
            d.unit = util::to_lower(dj["unit"].get<std::string>());
            if (!dj["weeks"].is_number_integer() || dj["weeks"].get<int>() < 1)
                throw_data(where + ": weeks must be a positive integer");
            d.weeks = dj["weeks"].get<int>();
            plan.drugs.push_back(std::move(d));
        }
        plans.push_back(std::move(plan));
    }
    return first_plan_per_patient(std::move(plans));
}

std::vector<TreatmentPlan> first_plan_per_patient(std::vector<TreatmentPlan> plans) {
    std::vector<TreatmentPlan> out;
    std::unordered_map<std::string, std::size_t> index;
    for (auto& plan : plans) {
        auto it = index.find(plan.patient_id);
        if (it == index.end()) {
            index.emplace(plan.patient_id, out.size());
            out.push_back(std::move(plan));
        } else if (plan.plan_start < out[it->second].plan_start) {
            out[it->second] = std::move(plan);
        }
    }
    return out;
}

std::vector<ApprovedDrug> load_approved_drugs(const std::string& path) {
    auto table = util::read_csv(path);
    auto gpi_col = table.require_column("gpi8");
    auto name_col = table.require_column("name");
    std::vector<ApprovedDrug> out;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::string where = path + " row " + std::to_string(r + 2);
        ApprovedDrug d;
        d.gpi = util::trim(table.rows[r][gpi_col]);
        d.name = util::to_lower(util::trim(table.rows[r][name_col]));
        if (d.gpi.empty() || d.gpi.size() > 8) throw_data(where + ": gpi8 prefix must be 1..8 characters");
        if (d.name.empty()) throw_data(where + ": drug name is empty");
        if (!seen.insert(d.gpi).second) throw_data(where + ": duplicate gpi8 prefix '" + d.gpi + "'");
        out.push_back(std::move(d));
    }
    if (out.empty()) throw_data(path + ": approved drug list is empty");
    return out;
}

namespace {

std::string normalize_gender(const std::string& raw, const std::string& where) {
    std::string g = util::to_lower(util::trim(raw));
    if (g == "f" || g == "female") return "female";
    if (g == "m" || g == "male") return "male";
    if (g == "other") return "other";
    throw_data(where + ": gender must be female/male/other, got '" + raw + "'");
}

std::string normalize_biomarker(const std::string& raw, const std::string& where, const std::string& field) {
    std::string v = util::to_lower(util::trim(raw));
    if (v.empty() || v == "positive" || v == "negative" || v == "unknown") return v;
    throw_data(where + ": " + field + " must be positive/negative/unknown or empty, got '" + raw + "'");
}

std::optional<double> optional_double(const std::string& raw, const std::string& what) {
    std::string v = util::trim(raw);
    if (v.empty()) return std::nullopt;
    return parse_double_strict(v, what);
}

}  // namespace

std::vector<EmrRow> load_emr_csv(const std::string& path) {
    auto table = util::read_csv(path);
    auto id_col = table.require_column("patient_id");
    auto age_col = table.require_column("age");
    auto gender_col = table.require_column("gender");
    auto bsa_col = table.require_column("bsa_m2");
    auto scr_col = table.require_column("serum_creatinine_mg_dl");
    auto readm_col = table.require_column("readmission_score");
    auto icd_col = table.require_column("icd10_codes");
    auto er_col = table.require_column("er");
    auto pr_col = table.require_column("pr");
    auto her2_col = table.require_column("her2");

    std::vector<EmrRow> out;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        std::string where = path + " row " + std::to_string(r + 2);
        EmrRow e;
        e.patient_id = util::trim(row[id_col]);
        if (e.patient_id.empty()) throw_data(where + ": patient_id is empty");
        if (!seen.insert(e.patient_id).second) throw_data(where + ": duplicate patient_id '" + e.patient_id + "'");
        e.age = parse_double_strict(row[age_col], where + " age");
        if (e.age < 0.0 || e.age > 130.0) throw_data(where + ": age out of range: " + row[age_col]);
        e.gender = normalize_gender(row[gender_col], where);
        e.bsa_m2 = optional_double(row[bsa_col], where + " bsa_m2");
        e.serum_creatinine = optional_double(row[scr_col], where + " serum_creatinine_mg_dl");
        e.readmission_score = optional_double(row[readm_col], where + " readmission_score");
        for (const auto& code : util::split(row[icd_col], ';')) {
            std::string c = util::trim(code);
            if (c.empty()) continue;
            for (char& ch : c) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            e.icd10_codes.push_back(std::move(c));
        }
        e.er = normalize_biomarker(row[er_col], where, "er");
        e.pr = normalize_biomarker(row[pr_col], where, "pr");
        e.her2 = normalize_biomarker(row[her2_col], where, "her2");
        out.push_back(std::move(e));
    }
    return out;
}

FailureCall derive_failure(const std::vector<DatedOutcome>& outcomes, const TreatmentPlan& plan) {
    FailureCall call;
    for (const auto& o : outcomes) {
        if (o.note_date < plan.plan_start)
            throw_data("outcome note for patient '" + plan.patient_id + "' dated " +
                       util::format_date(o.note_date) + " precedes plan start " +
                       util::format_date(plan.plan_start));
        const auto& r = o.record;
        bool progression_failure = r.progression.progressed && r.progression.discontinued;
        bool toxicity_failure = r.toxicity.adverse_effects && r.toxicity.discontinued_or_modified;
        bool death_failure = r.death_hospice.died || r.death_hospice.hospice;
        if (!(progression_failure || toxicity_failure || death_failure)) continue;
        util::Date when = o.note_date;
        if (death_failure && r.death_hospice.event_date) {
            when = parse_date_strict(*r.death_hospice.event_date, "death_hospice.event_date");
        }
        if (!call.event || when < *call.event_date) call.event_date = when;
        call.event = true;
    }
    return call;
}

data::SurvivalRecord time_to_event(const TreatmentPlan& plan, const std::optional<util::Date>& event_date,
                                   const util::Date& last_observation, std::vector<std::string>* warnings) {
    data::SurvivalRecord rec;
    rec.patient_id = plan.patient_id;
    long days = 0;
    if (event_date) {
        days = util::days_between(plan.plan_start, *event_date);
        if (days < 0)
            throw_data("NegativeDuration: patient '" + plan.patient_id + "' event " +
                       util::format_date(*event_date) + " precedes plan start " +
                       util::format_date(plan.plan_start));
        rec.event = true;
    } else {
        if (last_observation < plan.plan_start)
            throw_data("patient '" + plan.patient_id + "' last observation precedes plan start");
        days = util::days_between(plan.plan_start, last_observation);
        rec.event = false;
    }
    if (days == 0) {
        days = 1;
        if (warnings)
            warnings->push_back("patient '" + plan.patient_id + "': zero-day duration clamped to 1 day");
    }
    rec.time_days = days;
    return rec;
}

std::optional<std::string> RegimenCatalog::match(const std::string& gpi8) const {
    const ApprovedDrug* best = nullptr;
    for (const auto& d : approved) {
        if (!util::starts_with(gpi8, d.gpi)) continue;
        if (!best || d.gpi.size() > best->gpi.size()) best = &d;
    }
    if (!best) return std::nullopt;
    return best->name;
}

std::string RegimenCatalog::combo_name(const std::vector<std::string>& drugs) { return util::join(drugs, "+"); }

RegimenCatalog build_regimen_catalog(const std::vector<TreatmentPlan>& plans,
                                     const std::vector<ApprovedDrug>& approved, int support_threshold,
                                     std::vector<std::string>* warnings) {
    if (support_threshold < 1) throw_config("support_threshold must be >= 1");
    RegimenCatalog catalog;
    catalog.approved = approved;
    catalog.support_threshold = support_threshold;

    std::set<std::string> names;
    std::map<std::string, std::pair<std::vector<std::string>, std::set<std::string>>> combos;
    for (const auto& plan : plans) {
        std::set<std::string> plan_drugs;
        for (const auto& drug : plan.drugs) {
            auto name = catalog.match(drug.gpi8);
            if (!name) {
                if (warnings)
                    warnings->push_back("UnknownDrug: patient '" + plan.patient_id + "' drug '" + drug.name +
                                        "' (gpi8 " + drug.gpi8 + ") not in approved list");
                continue;
            }
            plan_drugs.insert(*name);
            names.insert(*name);
        }
        if (plan_drugs.empty()) continue;
        std::vector<std::string> sorted(plan_drugs.begin(), plan_drugs.end());
        auto& entry = combos[RegimenCatalog::combo_name(sorted)];
        entry.first = sorted;
        entry.second.insert(plan.patient_id);
    }
    catalog.drug_names.assign(names.begin(), names.end());
    for (auto& [name, entry] : combos) {
        if (entry.second.size() < static_cast<std::size_t>(support_threshold)) continue;
        catalog.combinations.push_back({entry.first, entry.second.size()});
    }
    return catalog;
}

namespace {

EncodingTable make_table(std::string name, std::vector<std::pair<std::string, double>> codes) {
    EncodingTable t;
    t.name = std::move(name);
    t.codes = std::move(codes);
    return t;
}

}  // namespace

std::optional<double> EncodingTable::encode(const std::string& value) const {
    for (const auto& [v, c] : codes)
        if (v == value) return c;
    return std::nullopt;
}

std::optional<std::string> EncodingTable::decode(double code) const {
    for (const auto& [v, c] : codes)
        if (c == code) return v;
    return std::nullopt;
}

const EncodingTable& t_stage_encoding() {
    static const EncodingTable t = make_table(
        "t_stage", {{"T0", 0}, {"Tis", 1}, {"T1", 2}, {"T2", 3}, {"T3", 4}, {"T4", 5}});
    return t;
}

const EncodingTable& n_stage_encoding() {
    static const EncodingTable t = make_table("n_stage", {{"N0", 0}, {"N1", 1}, {"N2", 2}, {"N3", 3}});
    return t;
}

const EncodingTable& m_stage_encoding() {
    static const EncodingTable t = make_table("m_stage", {{"M0", 0}, {"M1", 1}});
    return t;
}

const EncodingTable& stage_group_encoding() {
    static const EncodingTable t = make_table("stage_group", {{"0", 0},
                                                              {"I", 1},
                                                              {"IA", 2},
                                                              {"IB", 3},
                                                              {"II", 4},
                                                              {"IIA", 5},
                                                              {"IIB", 6},
                                                              {"III", 7},
                                                              {"IIIA", 8},
                                                              {"IIIB", 9},
                                                              {"IIIC", 10},
                                                              {"IV", 11}});
    return t;
}

const EncodingTable& grade_encoding() {
    static const EncodingTable t = make_table("grade", {{"G1", 1}, {"G2", 2}, {"G3", 3}, {"G4", 4}});
    return t;
}

const EncodingTable& biomarker_encoding() {
    static const EncodingTable t = make_table("biomarker", {{"negative", 0}, {"positive", 1}});
    return t;
}

const EncodingTable& gender_encoding() {
    static const EncodingTable t = make_table("gender", {{"female", 0}, {"male", 1}, {"other", 2}});
    return t;
}

const std::vector<std::pair<std::string, std::vector<std::string>>>& comorbidity_groups() {
    static const std::vector<std::pair<std::string, std::vector<std::string>>> groups = {
        {"comorb_chf", {"I50"}},
        {"comorb_arrhythmia", {"I47", "I48", "I49"}},
        {"comorb_valvular", {"I34", "I35", "I36", "I37"}},
        {"comorb_pulm_circulation", {"I26", "I27"}},
        {"comorb_peripheral_vascular", {"I70", "I71"}},
        {"comorb_hypertension", {"I10", "I11", "I12", "I13", "I15"}},
        {"comorb_chronic_pulmonary", {"J40", "J41", "J42", "J43", "J44", "J45", "J47"}},
        {"comorb_diabetes", {"E10", "E11", "E12", "E13"}},
        {"comorb_hypothyroidism", {"E00", "E01", "E02", "E03"}},
        {"comorb_renal_failure", {"N18", "N19"}},
        {"comorb_liver_disease", {"K70", "K72", "K73", "K74", "K76"}},
        {"comorb_obesity", {"E66"}},
    };
    return groups;
}

FeatureSchema FeatureSchema::build(const RegimenCatalog& catalog) {
    FeatureSchema schema;
    auto& cols = schema.columns;
    auto with_marker = [&](const char* name) {
        cols.emplace_back(name);
        cols.push_back(std::string(name) + "__missing");
    };
    cols.emplace_back("age");
    cols.emplace_back("gender");
    with_marker("bsa_m2");
    with_marker("serum_creatinine_mg_dl");
    with_marker("readmission_score");
    for (const auto& [name, prefixes] : comorbidity_groups()) cols.push_back(name);
    with_marker("er");
    with_marker("pr");
    with_marker("her2");
    with_marker("ecog");
    with_marker("karnofsky");
    with_marker("t_stage");
    with_marker("n_stage");
    with_marker("m_stage");
    with_marker("stage_group");
    with_marker("grade");
    with_marker("dose_per_week");
    cols.emplace_back("weeks");
    for (const auto& combo : catalog.combinations)
        cols.push_back("regimen__" + RegimenCatalog::combo_name(combo.drugs));
    for (const auto& name : catalog.drug_names) cols.push_back("drug__" + name);
    cols.emplace_back("drug__other");
    return schema;
}

std::size_t FeatureSchema::index_of(const std::string& column) const {
    auto it = std::find(columns.begin(), columns.end(), column);
    if (it == columns.end()) throw Error(ErrorKind::internal, "unknown feature column '" + column + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

extraction::PhenotypeRecord merge_phenotypes(
    std::vector<std::pair<util::Date, extraction::PhenotypeRecord>> dated) {
    std::stable_sort(dated.begin(), dated.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    extraction::PhenotypeRecord merged;
    auto take_str = [](std::optional<std::string>& dst, const std::optional<std::string>& src) {
        if (!dst && src) dst = src;
    };
    for (const auto& [date, rec] : dated) {
        take_str(merged.t_stage, rec.t_stage);
        take_str(merged.n_stage, rec.n_stage);
        take_str(merged.m_stage, rec.m_stage);
        take_str(merged.stage_group, rec.stage_group);
        take_str(merged.grade, rec.grade);
        if (!merged.tumor_size_cm && rec.tumor_size_cm) merged.tumor_size_cm = rec.tumor_size_cm;
        if (!merged.ecog && rec.ecog) merged.ecog = rec.ecog;
        if (!merged.karnofsky && rec.karnofsky) merged.karnofsky = rec.karnofsky;
        if (merged.er == "unknown" && rec.er != "unknown") merged.er = rec.er;
        if (merged.pr == "unknown" && rec.pr != "unknown") merged.pr = rec.pr;
        if (merged.her2 == "unknown" && rec.her2 != "unknown") merged.her2 = rec.her2;
    }
    return merged;
}

namespace {

double unit_to_mg(const std::string& unit, bool& ok) {
    ok = true;
    if (unit == "mg") return 1.0;
    if (unit == "g") return 1000.0;
    if (unit == "mcg" || unit == "ug") return 0.001;
    ok = false;
    return 0.0;
}

std::string resolve_biomarker(const std::string& field, const std::string& emr_value,
                              const std::string& extracted, const std::string& patient_id,
                              std::vector<std::string>* conflicts) {
    bool emr_definite = emr_value == "positive" || emr_value == "negative";
    bool ext_definite = extracted == "positive" || extracted == "negative";
    if (emr_definite) {
        if (ext_definite && extracted != emr_value && conflicts)
            conflicts->push_back("ConflictingValues: patient '" + patient_id + "' " + field + ": EMR '" +
                                 emr_value + "' overrides extracted '" + extracted + "'");
        return emr_value;
    }
    if (ext_definite) return extracted;
    return "unknown";
}

}  // namespace

FeatureRow assemble_features(const EmrRow& emr, const extraction::PhenotypeRecord& phenotype,
                             const TreatmentPlan& plan, const RegimenCatalog& catalog, const FeatureSchema& schema,
                             std::vector<std::string>* conflicts, std::vector<std::string>* warnings) {
    if (emr.patient_id != plan.patient_id)
        throw_data("AlignmentError: EMR row '" + emr.patient_id + "' paired with plan for '" + plan.patient_id +
                   "'");
    FeatureRow row;
    row.patient_id = emr.patient_id;
    row.values.assign(schema.columns.size(), 0.0);
    auto set = [&](const std::string& col, double v) { row.values[schema.index_of(col)] = v; };
    auto set_opt = [&](const std::string& col, const std::optional<double>& v) {
        if (v) set(col, *v);
        else set(col + "__missing", 1.0);
    };

    set("age", emr.age);
    auto gender = gender_encoding().encode(emr.gender);
    if (!gender) throw_data("patient '" + emr.patient_id + "': unencodable gender '" + emr.gender + "'");
    set("gender", *gender);
    set_opt("bsa_m2", emr.bsa_m2);
    set_opt("serum_creatinine_mg_dl", emr.serum_creatinine);
    set_opt("readmission_score", emr.readmission_score);

    for (const auto& [col, prefixes] : comorbidity_groups()) {
        bool hit = false;
        for (const auto& code : emr.icd10_codes)
            for (const auto& prefix : prefixes)
                if (util::starts_with(code, prefix)) hit = true;
        set(col, hit ? 1.0 : 0.0);
    }

    auto biomarker = [&](const std::string& field, const std::string& emr_value, const std::string& extracted) {
        std::string value = resolve_biomarker(field, emr_value, extracted, emr.patient_id, conflicts);
        set_opt(field, biomarker_encoding().encode(value));
    };
    biomarker("er", emr.er, phenotype.er);
    biomarker("pr", emr.pr, phenotype.pr);
    biomarker("her2", emr.her2, phenotype.her2);

    set_opt("ecog", phenotype.ecog ? std::optional<double>(*phenotype.ecog) : std::nullopt);
    set_opt("karnofsky", phenotype.karnofsky ? std::optional<double>(*phenotype.karnofsky) : std::nullopt);

    auto ordinal = [&](const std::string& col, const std::optional<std::string>& value,
                       const EncodingTable& table) {
        set_opt(col, value ? table.encode(*value) : std::nullopt);
    };
    ordinal("t_stage", phenotype.t_stage, t_stage_encoding());
    ordinal("n_stage", phenotype.n_stage, n_stage_encoding());
    ordinal("m_stage", phenotype.m_stage, m_stage_encoding());
    ordinal("stage_group", phenotype.stage_group, stage_group_encoding());
    ordinal("grade", phenotype.grade, grade_encoding());

    double dose_per_week = 0.0;
    bool any_dose = false;
    int weeks = 0;
    std::set<std::string> plan_drugs;
    bool other = false;
    for (const auto& drug : plan.drugs) {
        weeks = std::max(weeks, drug.weeks);
        bool ok = false;
        double factor = unit_to_mg(drug.unit, ok);
        if (ok) {
            dose_per_week += drug.total_dose * factor / drug.weeks;
            any_dose = true;
        } else if (warnings) {
            warnings->push_back("patient '" + emr.patient_id + "': unit '" + drug.unit + "' for drug '" +
                                drug.name + "' not normalizable to mg; excluded from dose_per_week");
        }
        auto name = catalog.match(drug.gpi8);
        if (name) plan_drugs.insert(*name);
        else other = true;
    }
    set_opt("dose_per_week", any_dose ? std::optional<double>(dose_per_week) : std::nullopt);
    set("weeks", static_cast<double>(weeks));

    if (!plan_drugs.empty()) {
        std::vector<std::string> sorted(plan_drugs.begin(), plan_drugs.end());
        std::string combo = "regimen__" + RegimenCatalog::combo_name(sorted);
        for (const auto& c : catalog.combinations) {
            if ("regimen__" + RegimenCatalog::combo_name(c.drugs) == combo) {
                set(combo, 1.0);
                break;
            }
        }
    }
    for (const auto& name : plan_drugs) set("drug__" + name, 1.0);
    set("drug__other", other ? 1.0 : 0.0);
    return row;
}

CohortSummary cohort_summary(const std::vector<data::SurvivalRecord>& records,
                             const std::vector<FeatureRow>& rows, const FeatureSchema& schema) {
    CohortSummary s;
    s.n = records.size();
    if (records.empty()) return s;
    std::unordered_map<std::string, bool> event_by_id;
    double events = 0.0;
    for (const auto& r : records) {
        event_by_id[r.patient_id] = r.event;
        if (r.event) events += 1.0;
    }
    s.failure_prevalence = events / static_cast<double>(records.size());
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const auto& col = schema.columns[c];
        if (!util::starts_with(col, "regimen__")) continue;
        CohortSummary::RegimenStat stat;
        stat.name = col.substr(9);
        double failures = 0.0;
        for (const auto& row : rows) {
            if (row.values[c] != 1.0) continue;
            auto it = event_by_id.find(row.patient_id);
            if (it == event_by_id.end()) continue;
            ++stat.n;
            if (it->second) failures += 1.0;
        }
        stat.failure_pct = stat.n == 0 ? 0.0 : 100.0 * failures / static_cast<double>(stat.n);
        s.regimens.push_back(std::move(stat));
    }
    return s;
}

json summary_to_json(const CohortSummary& s) {
    json regimens = json::array();
    for (const auto& r : s.regimens)
        regimens.push_back({{"regimen", r.name}, {"n", r.n}, {"failure_pct", r.failure_pct}});
    return json{{"n", s.n}, {"failure_prevalence", s.failure_prevalence}, {"regimens", regimens}};
}

void write_feature_csv(const std::string& path, const FeatureSchema& schema, const std::vector<FeatureRow>& rows) {
    std::ostringstream out;
    std::vector<std::string> header;
    header.emplace_back("patient_id");
    header.insert(header.end(), schema.columns.begin(), schema.columns.end());
    util::write_csv_row(out, header);
    for (const auto& row : rows) {
        if (row.values.size() != schema.columns.size())
            throw Error(ErrorKind::internal, "feature row for '" + row.patient_id + "' does not match the schema");
        std::vector<std::string> fields;
        fields.reserve(header.size());
        fields.push_back(row.patient_id);
        for (double v : row.values) fields.push_back(util::format_double(v));
        util::write_csv_row(out, fields);
    }
    util::write_file(path, out.str());
}

data::Dataset load_feature_csv(const std::string& path) {
    auto table = util::read_csv(path);
    if (table.header.empty() || table.header[0] != "patient_id")
        throw_data(path + ": first column must be patient_id");
    data::Dataset ds;
    ds.feature_names.assign(table.header.begin() + 1, table.header.end());
    ds.columns.assign(ds.feature_names.size(), {});
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        ds.row_ids.push_back(row[0]);
        for (std::size_t c = 1; c < row.size(); ++c)
            ds.columns[c - 1].push_back(
                parse_double_strict(row[c], path + " row " + std::to_string(r + 2) + " " + table.header[c]));
    }
    ds.validate();
    return ds;
}

void write_survival_jsonl(const std::string& path, const std::vector<data::SurvivalRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        json j = {{"patient_id", r.patient_id}, {"time_days", r.time_days}, {"event", r.event}};
        out << j.dump() << "\n";
    }
    util::write_file(path, out.str());
}

std::vector<data::SurvivalRecord> load_survival_jsonl(const std::string& path) {
    std::string content = util::read_file(path);
    std::vector<data::SurvivalRecord> out;
    std::istringstream in(content);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        std::string where = path + " line " + std::to_string(line_no);
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw_data(where + ": not a JSON object");
        reject_unknown_keys(j, {"patient_id", "time_days", "event"}, where);
        for (const char* key : {"patient_id", "time_days", "event"})
            if (!j.contains(key)) throw_data(where + ": missing key '" + std::string(key) + "'");
        data::SurvivalRecord r;
        if (!j["patient_id"].is_string()) throw_data(where + ": patient_id must be a string");
        r.patient_id = j["patient_id"].get<std::string>();
        if (!j["time_days"].is_number_integer() || j["time_days"].get<long>() < 1)
            throw_data(where + ": time_days must be a positive integer");
        r.time_days = j["time_days"].get<long>();
        if (!j["event"].is_boolean()) throw_data(where + ": event must be a boolean");
        r.event = j["event"].get<bool>();
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

json encoding_to_json(const EncodingTable& t) {
    json j = json::object();
    for (const auto& [value, code] : t.codes) j[value] = code;
    return j;
}

}  // namespace

json data_dictionary(const FeatureSchema& schema, const RegimenCatalog& catalog) {
    json columns = json::array();
    auto has = [&](const std::string& name) {
        return std::find(schema.columns.begin(), schema.columns.end(), name) != schema.columns.end();
    };
    for (const auto& col : schema.columns) {
        json entry = {{"name", col}};
        if (col.ends_with("__missing")) {
            entry["kind"] = "binary";
            entry["description"] = "1 when " + col.substr(0, col.size() - 9) + " is missing; its value column holds 0";
        } else if (util::starts_with(col, "comorb_") || util::starts_with(col, "regimen__") ||
                   util::starts_with(col, "drug__")) {
            entry["kind"] = "binary";
        } else if (col == "gender") {
            entry["kind"] = "ordinal";
            entry["encoding"] = "gender";
        } else if (col == "er" || col == "pr" || col == "her2") {
            entry["kind"] = "ordinal";
            entry["encoding"] = "biomarker";
        } else if (col == "t_stage" || col == "n_stage" || col == "m_stage" || col == "stage_group" ||
                   col == "grade") {
            entry["kind"] = "ordinal";
            entry["encoding"] = col;
        } else {
            entry["kind"] = "numeric";
        }
        if (has(col + "__missing")) entry["missing_marker"] = col + "__missing";
        columns.push_back(std::move(entry));
    }

    json encodings = {{"t_stage", encoding_to_json(t_stage_encoding())},
                      {"n_stage", encoding_to_json(n_stage_encoding())},
                      {"m_stage", encoding_to_json(m_stage_encoding())},
                      {"stage_group", encoding_to_json(stage_group_encoding())},
                      {"grade", encoding_to_json(grade_encoding())},
                      {"biomarker", encoding_to_json(biomarker_encoding())},
                      {"gender", encoding_to_json(gender_encoding())}};

    json groups = json::object();
    for (const auto& [name, prefixes] : comorbidity_groups()) groups[name] = prefixes;

    json combos = json::array();
    for (const auto& c : catalog.combinations)
        combos.push_back({{"name", RegimenCatalog::combo_name(c.drugs)}, {"drugs", c.drugs}, {"support", c.support}});

    return json{{"columns", columns},
                {"encodings", encodings},
                {"comorbidity_groups", groups},
                {"regimen_combinations", combos},
                {"support_threshold", catalog.support_threshold}};
}

}  // namespace oncosurv::cohort
