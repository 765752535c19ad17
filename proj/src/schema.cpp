#include "oncosurv/schema.hpp"

#include <algorithm>
#include <cmath>

#include "oncosurv/util.hpp"

namespace oncosurv::extraction {

using nlohmann::json;

std::string to_string(Target t) { return t == Target::phenotype ? "phenotype" : "outcome"; }

std::optional<Target> target_from_string(std::string_view s) {
    if (s == "phenotype") return Target::phenotype;
    if (s == "outcome") return Target::outcome;
    return std::nullopt;
}

std::string schema_id(Target t) { return t == Target::phenotype ? "phenotype.v1" : "outcome.v1"; }

std::optional<Target> target_from_schema_id(std::string_view id) {
    if (id == "phenotype.v1") return Target::phenotype;
    if (id == "outcome.v1") return Target::outcome;
    return std::nullopt;
}

const std::vector<std::string>& t_stage_values() {
    static const std::vector<std::string> v = {"T0", "T1", "T2", "T3", "T4", "Tis", "TX"};
    return v;
}
const std::vector<std::string>& n_stage_values() {
    static const std::vector<std::string> v = {"N0", "N1", "N2", "N3", "NX"};
    return v;
}
const std::vector<std::string>& m_stage_values() {
    static const std::vector<std::string> v = {"M0", "M1", "MX"};
    return v;
}
const std::vector<std::string>& stage_group_values() {
    static const std::vector<std::string> v = {"0", "I", "IA", "IB", "II", "IIA", "IIB", "III", "IIIA", "IIIB", "IIIC", "IV"};
    return v;
}
const std::vector<std::string>& grade_values() {
    static const std::vector<std::string> v = {"G1", "G2", "G3", "G4", "GX"};
    return v;
}
const std::vector<std::string>& biomarker_values() {
    static const std::vector<std::string> v = {"positive", "negative", "unknown"};
    return v;
}

namespace {

bool in_vocab(const std::vector<std::string>& vocab, const std::string& value) {
    return std::find(vocab.begin(), vocab.end(), value) != vocab.end();
}

// Locates the first balanced JSON object in raw, string- and escape-aware.
std::optional<std::string> first_json_object(std::string_view raw) {
    std::size_t start = raw.find('{');
    if (start == std::string_view::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
        char c = raw[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
            if (depth == 0) return std::string(raw.substr(start, i - start + 1));
        }
    }
    return std::nullopt;
}

struct Validator {
    std::vector<Violation> violations;

    void flag(const std::string& field, const std::string& reason) { violations.push_back({field, reason}); }

    bool check_keys(const json& obj, const std::string& prefix, const std::vector<std::string>& required) {
        bool ok = true;
        for (const auto& key : required) {
            if (!obj.contains(key)) {
                flag(prefix + key, "missing required key");
                ok = false;
            }
        }
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (std::find(required.begin(), required.end(), it.key()) == required.end()) {
                flag(prefix + it.key(), "unknown key");
                ok = false;
            }
        }
        return ok;
    }

    std::optional<std::string> opt_enum(const json& obj, const std::string& field,
                                        const std::vector<std::string>& vocab) {
        const json& v = obj.at(field);
        if (v.is_null()) return std::nullopt;
        if (!v.is_string()) {
            flag(field, "expected string or null");
            return std::nullopt;
        }
        auto s = v.get<std::string>();
        if (!in_vocab(vocab, s)) {
            flag(field, "value '" + s + "' not in enum");
            return std::nullopt;
        }
        return s;
    }

    std::string req_enum(const json& obj, const std::string& field, const std::vector<std::string>& vocab,
                         const std::string& fallback) {
        const json& v = obj.at(field);
        if (!v.is_string()) {
            flag(field, "expected string");
            return fallback;
        }
        auto s = v.get<std::string>();
        if (!in_vocab(vocab, s)) {
            flag(field, "value '" + s + "' not in enum");
            return fallback;
        }
        return s;
    }

    bool req_bool(const json& obj, const std::string& field) {
        const json& v = obj.at(field);
        if (!v.is_boolean()) {
            flag(field, "expected boolean");
            return false;
        }
        return v.get<bool>();
    }

    std::string req_string(const json& obj, const std::string& field) {
        const json& v = obj.at(field);
        if (!v.is_string()) {
            flag(field, "expected string");
            return {};
        }
        return v.get<std::string>();
    }
};

}  // namespace

ParseResult parse_and_validate(std::string_view raw, std::string_view sid) {
    ParseResult result;
    auto target = target_from_schema_id(sid);
    if (!target) {
        result.violations.push_back({"schema_id", "unregistered schema '" + std::string(sid) + "'"});
        return result;
    }

    auto obj_text = first_json_object(raw);
    if (!obj_text) {
        result.violations.push_back({"", "NoJsonFound: no JSON object in model output"});
        return result;
    }
    json obj = json::parse(*obj_text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        result.violations.push_back({"", "NoJsonFound: first brace block is not valid JSON"});
        return result;
    }
    result.valid_json = true;

    Validator v;
    if (*target == Target::phenotype) {
        static const std::vector<std::string> keys = {"t_stage", "n_stage",   "m_stage", "stage_group",
                                                      "tumor_size_cm", "grade", "ecog",  "karnofsky",
                                                      "er",      "pr",        "her2"};
        if (!v.check_keys(obj, "", keys)) {
            result.violations = std::move(v.violations);
            return result;
        }
        PhenotypeRecord rec;
        rec.t_stage = v.opt_enum(obj, "t_stage", t_stage_values());
        rec.n_stage = v.opt_enum(obj, "n_stage", n_stage_values());
        rec.m_stage = v.opt_enum(obj, "m_stage", m_stage_values());
        rec.stage_group = v.opt_enum(obj, "stage_group", stage_group_values());
        rec.grade = v.opt_enum(obj, "grade", grade_values());
        rec.er = v.req_enum(obj, "er", biomarker_values(), "unknown");
        rec.pr = v.req_enum(obj, "pr", biomarker_values(), "unknown");
        rec.her2 = v.req_enum(obj, "her2", biomarker_values(), "unknown");

        const json& size = obj.at("tumor_size_cm");
        if (!size.is_null()) {
            if (!size.is_number()) {
                v.flag("tumor_size_cm", "expected number or null");
            } else {
                double cm = size.get<double>();
                if (!std::isfinite(cm) || cm < 0.0 || cm >= 50.0) {
                    v.flag("tumor_size_cm", "out of range [0, 50)");
                } else {
                    rec.tumor_size_cm = cm;
                }
            }
        }
        const json& ecog = obj.at("ecog");
        if (!ecog.is_null()) {
            if (!ecog.is_number_integer()) {
                v.flag("ecog", "expected integer or null");
            } else {
                int e = ecog.get<int>();
                if (e < 0 || e > 5) v.flag("ecog", "out of range 0..5");
                else rec.ecog = e;
            }
        }
        const json& kf = obj.at("karnofsky");
        if (!kf.is_null()) {
            if (!kf.is_number_integer()) {
                v.flag("karnofsky", "expected integer or null");
            } else {
                int k = kf.get<int>();
                if (k < 0 || k > 100 || k % 10 != 0) v.flag("karnofsky", "must be 0..100 in multiples of 10");
                else rec.karnofsky = k;
            }
        }
        result.violations = std::move(v.violations);
        if (result.violations.empty()) {
            result.schema_ok = true;
            result.record = Record{std::move(rec)};
        }
        return result;
    }

    static const std::vector<std::string> top = {"progression", "toxicity", "death_hospice"};
    if (!v.check_keys(obj, "", top)) {
        result.violations = std::move(v.violations);
        return result;
    }
    for (const auto& key : top) {
        if (!obj.at(key).is_object()) {
            v.flag(key, "expected object");
            result.violations = std::move(v.violations);
            return result;
        }
    }
    OutcomeRecord rec;
    const json& prog = obj.at("progression");
    if (v.check_keys(prog, "progression.", {"progressed", "discontinued", "details"})) {
        rec.progression.progressed = v.req_bool(prog, "progressed");
        rec.progression.discontinued = v.req_bool(prog, "discontinued");
        rec.progression.details = v.req_string(prog, "details");
    }
    const json& tox = obj.at("toxicity");
    if (v.check_keys(tox, "toxicity.", {"adverse_effects", "qol_deterioration", "discontinued_or_modified", "details"})) {
        rec.toxicity.adverse_effects = v.req_bool(tox, "adverse_effects");
        rec.toxicity.qol_deterioration = v.req_bool(tox, "qol_deterioration");
        rec.toxicity.discontinued_or_modified = v.req_bool(tox, "discontinued_or_modified");
        rec.toxicity.details = v.req_string(tox, "details");
    }
    const json& dh = obj.at("death_hospice");
    if (v.check_keys(dh, "death_hospice.", {"died", "hospice", "event_date", "details"})) {
        rec.death_hospice.died = v.req_bool(dh, "died");
        rec.death_hospice.hospice = v.req_bool(dh, "hospice");
        rec.death_hospice.details = v.req_string(dh, "details");
        const json& date = dh.at("event_date");
        if (!date.is_null()) {
            if (!date.is_string()) {
                v.flag("death_hospice.event_date", "expected ISO-8601 string or null");
            } else if (!util::parse_date(date.get<std::string>())) {
                v.flag("death_hospice.event_date", "not a valid ISO-8601 date");
            } else {
                rec.death_hospice.event_date = date.get<std::string>();
            }
        }
        if (rec.death_hospice.event_date && !rec.death_hospice.died && !rec.death_hospice.hospice) {
            v.flag("death_hospice.event_date", "event_date requires died or hospice");
        }
    }
    result.violations = std::move(v.violations);
    if (result.violations.empty()) {
        result.schema_ok = true;
        result.record = Record{std::move(rec)};
    }
    return result;
}

json phenotype_to_json(const PhenotypeRecord& r) {
    auto opt_str = [](const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["t_stage"] = opt_str(r.t_stage);
    j["n_stage"] = opt_str(r.n_stage);
    j["m_stage"] = opt_str(r.m_stage);
    j["stage_group"] = opt_str(r.stage_group);
    j["tumor_size_cm"] = r.tumor_size_cm ? json(*r.tumor_size_cm) : json(nullptr);
    j["grade"] = opt_str(r.grade);
    j["ecog"] = r.ecog ? json(*r.ecog) : json(nullptr);
    j["karnofsky"] = r.karnofsky ? json(*r.karnofsky) : json(nullptr);
    j["er"] = r.er;
    j["pr"] = r.pr;
    j["her2"] = r.her2;
    return j;
}

json outcome_to_json(const OutcomeRecord& r) {
    json j;
    j["progression"] = {{"progressed", r.progression.progressed},
                        {"discontinued", r.progression.discontinued},
                        {"details", r.progression.details}};
    j["toxicity"] = {{"adverse_effects", r.toxicity.adverse_effects},
                     {"qol_deterioration", r.toxicity.qol_deterioration},
                     {"discontinued_or_modified", r.toxicity.discontinued_or_modified},
                     {"details", r.toxicity.details}};
    j["death_hospice"] = {{"died", r.death_hospice.died},
                          {"hospice", r.death_hospice.hospice},
                          {"event_date", r.death_hospice.event_date ? json(*r.death_hospice.event_date) : json(nullptr)},
                          {"details", r.death_hospice.details}};
    return j;
}

json record_to_json(const Record& record) {
    if (std::holds_alternative<PhenotypeRecord>(record)) return phenotype_to_json(std::get<PhenotypeRecord>(record));
    return outcome_to_json(std::get<OutcomeRecord>(record));
}

std::string schema_text(Target t) {
    if (t == Target::phenotype) {
        return R"({
  "t_stage": "T0|T1|T2|T3|T4|Tis|TX or null",
  "n_stage": "N0|N1|N2|N3|NX or null",
  "m_stage": "M0|M1|MX or null",
  "stage_group": "0|I|IA|IB|II|IIA|IIB|III|IIIA|IIIB|IIIC|IV or null",
  "tumor_size_cm": "number in [0,50) or null",
  "grade": "G1|G2|G3|G4|GX or null",
  "ecog": "integer 0..5 or null",
  "karnofsky": "integer 0..100, multiple of 10, or null",
  "er": "positive|negative|unknown",
  "pr": "positive|negative|unknown",
  "her2": "positive|negative|unknown"
})";
    }
    return R"({
  "progression": {"progressed": "bool", "discontinued": "bool", "details": "string"},
  "toxicity": {"adverse_effects": "bool", "qol_deterioration": "bool", "discontinued_or_modified": "bool", "details": "string"},
  "death_hospice": {"died": "bool", "hospice": "bool", "event_date": "ISO-8601 date or null", "details": "string"}
})";
}

PhenotypeRecord empty_phenotype() { return PhenotypeRecord{}; }
OutcomeRecord empty_outcome() { return OutcomeRecord{}; }
Record empty_record(Target t) {
    if (t == Target::phenotype) return Record{empty_phenotype()};
    return Record{empty_outcome()};
}

}  // namespace oncosurv::extraction
