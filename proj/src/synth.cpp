#include "oncosurv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oncosurv/csv.hpp"
#include "oncosurv/errors.hpp"
#include "oncosurv/extraction.hpp"

namespace oncosurv::synth {

using nlohmann::json;
using extraction::Target;

namespace {

constexpr util::Date kBaseDate{2019, 1, 1};

double round_to(double v, int decimals) {
    double f = std::pow(10.0, decimals);
    return std::round(v * f) / f;
}

int uniform_between(util::Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(rng.uniform_int(static_cast<std::size_t>(hi - lo + 1)));
}

const std::string& choose(util::Rng& rng, const std::vector<std::string>& v) { return v[rng.uniform_int(v.size())]; }

// weights need not sum to 1; the last entry absorbs the remainder
std::size_t weighted_index(util::Rng& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;
}

std::string pad4(int n) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", n);
    return buf;
}

struct RegimenTemplate {
    std::vector<std::pair<std::size_t, double>> drugs;  // (index into drug list, weekly mg)
    double weight;
};

const std::vector<RegimenTemplate>& regimen_templates() {
    static const std::vector<RegimenTemplate> regs = {
        {{{0, 120.0}, {1, 1200.0}}, 0.25},  // doxorubicin + cyclophosphamide
        {{{3, 150.0}, {1, 1200.0}}, 0.20},  // docetaxel + cyclophosphamide
        {{{2, 160.0}}, 0.15},               // paclitaxel
        {{{4, 450.0}, {9, 2000.0}}, 0.15},  // carboplatin + gemcitabine
        {{{6, 140.0}}, 0.10},               // tamoxifen
        {{{7, 17.5}}, 0.10},                // letrozole
        {{{8, 14000.0}}, 0.05},             // capecitabine; deliberately thin support
    };
    return regs;
}

// ---- sentence templates; every value-bearing form is covered by the lexicon ----

std::string tnm_sentence(util::Rng& rng, const std::string& t, const std::string& n, const std::string& m) {
    switch (rng.uniform_int(3)) {
        case 0: return "Pathologic staging is p" + t + " p" + n + " p" + m;
        case 1: return "Clinical staging is c" + t + " c" + n + " c" + m;
        default: return "TNM classification recorded as " + t + " " + n + " " + m;
    }
}

std::string stage_sentence(util::Rng& rng, const std::string& stage) {
    switch (rng.uniform_int(3)) {
        case 0: return "Overall stage " + stage + " disease";
        case 1: return "Stage group: " + stage;
        default: return "The disease is stage " + stage + " at presentation";
    }
}

std::string size_sentence(util::Rng& rng, double size_cm) {
    std::string s = util::format_double(size_cm);
    switch (rng.uniform_int(3)) {
        case 0: return "Ultrasound demonstrates a mass measuring " + s + " cm";
        case 1: return "The dominant lesion measures " + s + " cm in diameter";
        default: return "Mammography shows a " + s + " cm spiculated nodule";
    }
}

std::string grade_sentence(util::Rng& rng, int grade) {
    std::string g = std::to_string(grade);
    switch (rng.uniform_int(3)) {
        case 0: return "Histology demonstrates grade " + g + " invasive ductal carcinoma";
        case 1: return "Tumor grade: " + g;
        default: return "Biopsy reveals grade " + g + " histology";
    }
}

std::string ecog_sentence(util::Rng& rng, int ecog) {
    std::string e = std::to_string(ecog);
    switch (rng.uniform_int(3)) {
        case 0: return "ECOG performance status is " + e;
        case 1: return "ECOG: " + e;
        default: return "Current ECOG score " + e;
    }
}

std::string karnofsky_sentence(util::Rng& rng, int kps) {
    std::string k = std::to_string(kps);
    switch (rng.uniform_int(3)) {
        case 0: return "Karnofsky performance score " + k;
        case 1: return "KPS is " + k + " at this visit";
        default: return "Karnofsky scale recorded at " + k;
    }
}

std::string receptor_sentence(util::Rng& rng, const std::optional<bool>& er, const std::optional<bool>& pr,
                              const std::optional<bool>& her2) {
    auto word = [](bool positive) { return positive ? std::string("positive") : std::string("negative"); };
    std::vector<std::string> parts;
    if (er) parts.push_back("ER " + word(*er));
    if (pr) parts.push_back("PR " + word(*pr));
    if (her2) parts.push_back("HER2 " + word(*her2));
    std::string joined = util::join(parts, ", ");
    return rng.bernoulli(0.5) ? "Receptor testing returns " + joined : "IHC panel: " + joined;
}

std::string progressed_sentence(util::Rng& rng) {
    switch (rng.uniform_int(3)) {
        case 0: return "Restaging imaging demonstrates disease progression";
        case 1: return "Surveillance imaging shows progression of disease in the liver";
        default: return "There are new metastases in the thoracic spine";
    }
}

std::string discontinued_sentence(util::Rng& rng) {
    switch (rng.uniform_int(3)) {
        case 0: return "Chemotherapy was discontinued after multidisciplinary review";
        case 1: return "Systemic therapy was stopped this week";
        default: return "Treatment was halted in light of these findings";
    }
}

std::string adverse_sentence(util::Rng& rng) {
    switch (rng.uniform_int(4)) {
        case 0: return "She reports persistent nausea and vomiting";
        case 1: return "Laboratory studies reveal significant neutropenia";
        case 2: return "He describes disabling fatigue and peripheral neuropathy";
        default: return "Ongoing diarrhea has required supportive measures";
    }
}

std::string modified_sentence(util::Rng& rng) {
    switch (rng.uniform_int(3)) {
        case 0: return "The dose was reduced by one level";
        case 1: return "Paclitaxel was held for one cycle";
        default: return "The regimen was switched to an alternative agent";
    }
}

std::string qol_sentence(util::Rng& rng) {
    return rng.bernoulli(0.5) ? "Quality of life has declined considerably"
                              : "QOL scores are worsening per the survey";
}

std::string death_sentence(util::Rng& rng, bool hospice, const std::string& iso_date) {
    if (hospice) {
        return rng.bernoulli(0.5) ? "He was transitioned to hospice care on " + iso_date
                                  : "Comfort care was initiated on " + iso_date;
    }
    return rng.bernoulli(0.5) ? "The patient passed away on " + iso_date
                              : "She died peacefully at home on " + iso_date;
}

const std::vector<std::string>& benign_sentences() {
    static const std::vector<std::string> v = {
        "She is tolerating therapy well",
        "Imaging shows stable disease",
        "He remains on first-line therapy",
        "Treatment continues per protocol",
    };
    return v;
}

const std::vector<std::string>& negated_sentences() {
    static const std::vector<std::string> v = {
        "She denies nausea or vomiting",
        "There is no evidence of disease progression",
        "No new metastases are identified",
        "There has been no decline in quality of life",
    };
    return v;
}

std::string join_sentences(const std::string& header, const std::vector<std::string>& sentences) {
    std::string text = header + "\n";
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        text += sentences[i];
        text += i + 1 < sentences.size() ? ". " : ".";
    }
    return text;
}

// weaves 2-3 fillers into the content sentences at deterministic positions
std::vector<std::string> weave_fillers(util::Rng& rng, std::vector<std::string> content) {
    const auto& pool = filler_sentences();
    int extra = uniform_between(rng, 2, 3);
    for (int i = 0; i < extra; ++i) {
        std::size_t at = rng.uniform_int(content.size() + 1);
        content.insert(content.begin() + static_cast<std::ptrdiff_t>(at), choose(rng, pool));
    }
    return content;
}

}  // namespace

const std::vector<cohort::ApprovedDrug>& default_drug_list() {
    static const std::vector<cohort::ApprovedDrug> drugs = {
        {"21300010", "doxorubicin"}, {"21100020", "cyclophosphamide"}, {"21400030", "paclitaxel"},
        {"21400040", "docetaxel"},   {"21200050", "carboplatin"},      {"21500060", "trastuzumab"},
        {"21600070", "tamoxifen"},   {"21600080", "letrozole"},        {"21700090", "capecitabine"},
        {"21250100", "gemcitabine"},
    };
    return drugs;
}

const std::vector<std::string>& filler_sentences() {
    static const std::vector<std::string> fillers = {
        "She presents for a scheduled clinic visit",
        "Vital signs are within normal limits",
        "Physical examination is unremarkable today",
        "Laboratory values were reviewed with the patient",
        "Medication reconciliation was completed this morning",
        "The care plan was discussed in detail",
        "Follow-up is arranged in three weeks",
        "Family history was updated in the chart",
        "Sleep and appetite are described as adequate",
        "The patient ambulates independently",
        "Home support remains in place",
        "Questions were answered at length",
        "Counseling on hydration and activity was provided",
        "Records from the referring office were requested",
        "Immunizations are current per the registry",
        "The patient verbalizes understanding of the instructions",
    };
    return fillers;
}

std::string make_long_note(std::size_t min_tokens, const std::string& needle, util::Rng& rng) {
    const auto& pool = filler_sentences();
    std::vector<std::string> sents;
    std::size_t tokens = 0;
    while (tokens < min_tokens) {
        const auto& s = pool[rng.uniform_int(pool.size())];
        sents.push_back(s);
        tokens += corpus::count_tokens(s, corpus::TokenizerKind::unicode_word);
    }
    sents.insert(sents.begin() + static_cast<std::ptrdiff_t>(sents.size() / 2), needle);
    return join_sentences("Extended encounter documentation", sents);
}

SynthOutput generate(const SynthConfig& cfg) {
    if (cfg.n_patients < 1) throw_config("synth n_patients must be >= 1");
    SynthOutput out;
    out.drugs = default_drug_list();

    static const std::vector<std::string> icd_pool = {
        "I50.9", "I48.91", "I35.0",  "I27.2", "I70.209", "I10",   "J44.9", "J45.40",
        "E11.9", "E03.9",  "N18.3",  "K76.0", "E66.9",   "Z51.11", "M54.5", "F41.1",
    };

    for (int i = 0; i < cfg.n_patients; ++i) {
        util::Rng rng(util::mix64(cfg.seed ^ util::mix64(static_cast<std::uint64_t>(i) + 1)));
        std::string pid = "P" + pad4(i + 1);

        // demographics
        cohort::EmrRow emr;
        emr.patient_id = pid;
        emr.age = std::floor(32.0 + rng.uniform() * 55.0);
        double g = rng.uniform();
        emr.gender = g < 0.62 ? "female" : g < 0.98 ? "male" : "other";
        if (!rng.bernoulli(0.08)) emr.bsa_m2 = round_to(1.5 + rng.uniform() * 0.9, 2);
        if (!rng.bernoulli(0.10)) emr.serum_creatinine = round_to(0.6 + rng.uniform() * 1.2, 2);
        if (!rng.bernoulli(0.15)) emr.readmission_score = round_to(rng.uniform(), 3);
        {
            std::vector<std::size_t> order(icd_pool.size());
            for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
            rng.shuffle(order);
            std::size_t n_codes = rng.uniform_int(5);
            for (std::size_t k = 0; k < n_codes; ++k) emr.icd10_codes.push_back(icd_pool[order[k]]);
            std::sort(emr.icd10_codes.begin(), emr.icd10_codes.end());
        }

        // treatment plan
        const auto& regs = regimen_templates();
        std::vector<double> weights;
        for (const auto& r : regs) weights.push_back(r.weight);
        const RegimenTemplate& reg = regs[weighted_index(rng, weights)];
        int weeks = uniform_between(rng, 4, 24);
        util::Date start = util::add_days(kBaseDate, uniform_between(rng, 0, 730));
        cohort::TreatmentPlan plan;
        plan.patient_id = pid;
        plan.plan_start = start;
        plan.plan_end = util::add_days(start, static_cast<long>(weeks) * 7);
        for (const auto& [drug_idx, weekly_mg] : reg.drugs) {
            cohort::DrugDose d;
            d.gpi8 = out.drugs[drug_idx].gpi;
            d.name = out.drugs[drug_idx].name;
            d.weeks = weeks;
            d.unit = "mg";
            double scale = 0.8 + rng.uniform() * 0.4;
            d.total_dose = round_to(weekly_mg * scale * weeks, 1);
            if (d.name == "cyclophosphamide" && rng.bernoulli(0.10)) {
                d.unit = "g";
                d.total_dose = round_to(d.total_dose / 1000.0, 3);
            }
            plan.drugs.push_back(std::move(d));
        }
        if (rng.bernoulli(0.03))
            plan.drugs.push_back({"99999999", "investigational agent", 100.0 * weeks, "mg", weeks});

        // latent disease state; the staging note documents a subset of it
        static const std::vector<std::string> ts = {"T1", "T2", "T3", "T4", "Tis"};
        static const std::vector<std::string> ns = {"N0", "N1", "N2", "N3"};
        static const std::vector<std::string> early = {"I",   "IA",  "IB",   "II",   "IIA",
                                                       "IIB", "III", "IIIA", "IIIB", "IIIC"};
        std::string lat_t = ts[weighted_index(rng, {0.3, 0.3, 0.2, 0.15, 0.05})];
        std::string lat_n = ns[weighted_index(rng, {0.45, 0.3, 0.15, 0.1})];
        std::string lat_m = rng.bernoulli(0.15) ? "M1" : "M0";
        std::string lat_stage = lat_m == "M1" ? "IV" : choose(rng, early);
        double lat_size = round_to(0.8 + rng.uniform() * 6.0, 1);
        int lat_grade = uniform_between(rng, 1, 4);
        int lat_ecog = uniform_between(rng, 0, 3);
        int lat_kps = 10 * uniform_between(rng, 5, 10);
        bool lat_er = rng.bernoulli(0.65);
        bool lat_pr = rng.bernoulli(0.55);
        bool lat_her2 = rng.bernoulli(0.25);

        std::vector<std::string> content;
        std::optional<bool> er_pos, pr_pos, her2_pos;  // documented receptor values
        if (rng.bernoulli(0.9)) {
            content.push_back(tnm_sentence(rng, lat_t, lat_n, lat_m));
            if (rng.bernoulli(0.85)) content.push_back(stage_sentence(rng, lat_stage));
        }
        if (rng.bernoulli(0.6)) content.push_back(size_sentence(rng, lat_size));
        if (rng.bernoulli(0.8)) content.push_back(grade_sentence(rng, lat_grade));
        if (rng.bernoulli(0.85)) content.push_back(ecog_sentence(rng, lat_ecog));
        if (rng.bernoulli(0.35)) content.push_back(karnofsky_sentence(rng, lat_kps));
        if (rng.bernoulli(0.85)) {
            if (rng.bernoulli(0.9)) er_pos = lat_er;
            if (rng.bernoulli(0.9)) pr_pos = lat_pr;
            if (rng.bernoulli(0.9)) her2_pos = lat_her2;
            if (er_pos || pr_pos || her2_pos) content.push_back(receptor_sentence(rng, er_pos, pr_pos, her2_pos));
        }

        corpus::ClinicalNote note1;
        note1.patient_id = pid;
        note1.note_id = pid + "-n1";
        note1.note_date = util::format_date(start);
        note1.note_type = corpus::NoteType::admission;
        note1.text = join_sentences("Medical oncology intake assessment", weave_fillers(rng, std::move(content)));

        // EMR biomarkers: agree with the documented value, or report the latent
        // one when the note is silent (never contradicting an extraction)
        auto emr_bio = [&](const std::optional<bool>& documented, bool latent) -> std::string {
            if (documented) {
                double u = rng.uniform();
                if (u < 0.70) return *documented ? "positive" : "negative";
                if (u < 0.85) return "unknown";
                return "";
            }
            double u = rng.uniform();
            if (u < 0.55) return latent ? "positive" : "negative";
            if (u < 0.75) return "unknown";
            return "";
        };
        emr.er = emr_bio(er_pos, lat_er);
        emr.pr = emr_bio(pr_pos, lat_pr);
        emr.her2 = emr_bio(her2_pos, lat_her2);

        // time to treatment failure follows a Weibull proportional-hazards
        // model on the latent state, so the extracted features carry signal
        double lp = -1.1;  // centers the predictor near zero
        if (lat_m == "M1") lp += 1.2;
        else if (lat_stage.rfind("III", 0) == 0) lp += 0.7;
        else if (lat_stage.rfind("II", 0) == 0) lp += 0.3;
        lp += 0.5 * (lat_grade - 2);
        lp += 0.4 * lat_ecog;
        if (lat_er) lp -= 0.6;
        if (lat_her2) lp += 0.35;
        lp += 0.08 * (lat_size - 3.0);
        long t_days = std::lround(rng.weibull(1.3, 640.0, std::exp(lp)));
        t_days = std::clamp(t_days, 30L, 700L);
        long c_days = uniform_between(rng, 200, 900);
        bool fail = t_days <= c_days;

        util::Date censor = util::add_days(start, c_days);
        std::vector<std::string> outcome_content;
        util::Date note2_date = censor;
        if (fail) {
            util::Date event = util::add_days(start, t_days);
            std::size_t mech = weighted_index(rng, {0.60, 0.35, 0.05});
            if (mech == 0) {
                outcome_content.push_back(progressed_sentence(rng));
                outcome_content.push_back(discontinued_sentence(rng));
                if (rng.bernoulli(0.3)) outcome_content.push_back("She denies nausea or vomiting");
                note2_date = event;
            } else if (mech == 1) {
                outcome_content.push_back(adverse_sentence(rng));
                outcome_content.push_back(modified_sentence(rng));
                if (rng.bernoulli(0.3)) outcome_content.push_back(qol_sentence(rng));
                note2_date = event;
            } else {
                bool hospice = rng.bernoulli(0.5);
                outcome_content.push_back(death_sentence(rng, hospice, util::format_date(event)));
                note2_date = util::add_days(event, uniform_between(rng, 0, 5));
            }
        } else {
            outcome_content.push_back(choose(rng, benign_sentences()));
            if (rng.bernoulli(0.5)) outcome_content.push_back(choose(rng, negated_sentences()));
        }

        corpus::ClinicalNote note2;
        note2.patient_id = pid;
        note2.note_id = pid + "-n2";
        note2.note_date = util::format_date(note2_date);
        note2.note_type = corpus::NoteType::progress;
        note2.text =
            join_sentences("Medical oncology follow-up visit", weave_fillers(rng, std::move(outcome_content)));

        // optional mid-treatment visit
        std::vector<corpus::ClinicalNote> notes = {note1, note2};
        long gap = util::days_between(start, note2_date);
        if (rng.bernoulli(0.3) && gap > 60) {
            std::vector<std::string> mid = {choose(rng, benign_sentences())};
            if (rng.bernoulli(0.25)) mid.push_back(ecog_sentence(rng, uniform_between(rng, 0, 2)));
            corpus::ClinicalNote note3;
            note3.patient_id = pid;
            note3.note_id = pid + "-n3";
            note3.note_date = util::format_date(util::add_days(start, uniform_between(rng, 1, static_cast<int>(gap) - 1)));
            note3.note_type = corpus::NoteType::progress;
            note3.text = join_sentences("Medical oncology treatment visit", weave_fillers(rng, std::move(mid)));
            notes.push_back(std::move(note3));
        }

        for (const auto& note : notes) {
            std::string pre = corpus::preprocess_note(note.text);
            out.gold.push_back({pid, note.note_id, note.note_date, Target::phenotype,
                                extraction::Record(extraction::rule_phenotype({pre}))});
            out.gold.push_back({pid, note.note_id, note.note_date, Target::outcome,
                                extraction::Record(extraction::rule_outcome({pre}))});
            out.notes.push_back(note);
        }
        out.plans.push_back(std::move(plan));
        out.emr.push_back(std::move(emr));
    }
    return out;
}

SynthPaths write_outputs(const SynthOutput& out, const std::string& dir) {
    SynthPaths paths;
    paths.corpus = dir + "/corpus.jsonl";
    paths.emr = dir + "/emr.csv";
    paths.plans = dir + "/plans.jsonl";
    paths.gold = dir + "/gold.jsonl";
    paths.drugs = dir + "/approved_drugs.csv";

    {
        std::ostringstream os;
        for (const auto& n : out.notes) {
            json j{{"patient_id", n.patient_id},
                   {"note_id", n.note_id},
                   {"note_date", n.note_date},
                   {"note_type", corpus::to_string(n.note_type)},
                   {"text", n.text}};
            os << j.dump() << "\n";
        }
        util::write_file(paths.corpus, os.str());
    }
    {
        std::ostringstream os;
        util::write_csv_row(os, {"patient_id", "age", "gender", "bsa_m2", "serum_creatinine_mg_dl",
                                 "readmission_score", "icd10_codes", "er", "pr", "her2"});
        for (const auto& e : out.emr) {
            auto opt = [](const std::optional<double>& v) { return v ? util::format_double(*v) : std::string(); };
            util::write_csv_row(os, {e.patient_id, util::format_double(e.age), e.gender, opt(e.bsa_m2),
                                     opt(e.serum_creatinine), opt(e.readmission_score),
                                     util::join(e.icd10_codes, ";"), e.er, e.pr, e.her2});
        }
        util::write_file(paths.emr, os.str());
    }
    {
        std::ostringstream os;
        for (const auto& p : out.plans) {
            json drugs = json::array();
            for (const auto& d : p.drugs) {
                drugs.push_back({{"gpi8", d.gpi8},
                                 {"name", d.name},
                                 {"total_dose", d.total_dose},
                                 {"unit", d.unit},
                                 {"weeks", d.weeks}});
            }
            json j{{"patient_id", p.patient_id},
                   {"plan_start", util::format_date(p.plan_start)},
                   {"plan_end", p.plan_end ? json(util::format_date(*p.plan_end)) : json(nullptr)},
                   {"drugs", std::move(drugs)}};
            os << j.dump() << "\n";
        }
        util::write_file(paths.plans, os.str());
    }
    {
        std::ostringstream os;
        for (const auto& gl : out.gold) {
            json j{{"patient_id", gl.patient_id},
                   {"note_id", gl.note_id},
                   {"note_date", gl.note_date},
                   {"target", extraction::to_string(gl.target)},
                   {"record", extraction::record_to_json(gl.record)}};
            os << j.dump() << "\n";
        }
        util::write_file(paths.gold, os.str());
    }
    {
        std::ostringstream os;
        util::write_csv_row(os, {"gpi8", "name"});
        for (const auto& d : out.drugs) util::write_csv_row(os, {d.gpi, d.name});
        util::write_file(paths.drugs, os.str());
    }
    return paths;
}

std::vector<GoldLabel> load_gold_jsonl(const std::string& path) {
    std::vector<GoldLabel> out;
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
            if (key != "patient_id" && key != "note_id" && key != "note_date" && key != "target" && key != "record")
                throw_data(where + ": unknown key '" + key + "'");
        }
        for (const char* key : {"patient_id", "note_id", "note_date", "target", "record"}) {
            if (!j.contains(key)) throw_data(where + ": missing key '" + std::string(key) + "'");
        }
        GoldLabel gl;
        gl.patient_id = j.at("patient_id").get<std::string>();
        gl.note_id = j.at("note_id").get<std::string>();
        gl.note_date = j.at("note_date").get<std::string>();
        auto target = extraction::target_from_string(j.at("target").get<std::string>());
        if (!target) throw_data(where + ": unknown target '" + j.at("target").get<std::string>() + "'");
        gl.target = *target;
        auto parsed =
            extraction::parse_and_validate(j.at("record").dump(), extraction::schema_id(gl.target));
        if (!parsed.record) {
            std::string reasons;
            for (const auto& v : parsed.violations) reasons += " [" + v.field + ": " + v.reason + "]";
            throw_data(where + ": record does not validate:" + reasons);
        }
        gl.record = *parsed.record;
        out.push_back(std::move(gl));
    }
    return out;
}

}  // namespace oncosurv::synth
