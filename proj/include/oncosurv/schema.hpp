#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace oncosurv::extraction {

enum class Target { phenotype, outcome };

std::string to_string(Target t);
std::optional<Target> target_from_string(std::string_view s);
std::string schema_id(Target t);                          // "phenotype.v1" / "outcome.v1"
std::optional<Target> target_from_schema_id(std::string_view id);

// Categorical vocabularies (AJCC-style staging conventions).
const std::vector<std::string>& t_stage_values();
const std::vector<std::string>& n_stage_values();
const std::vector<std::string>& m_stage_values();
const std::vector<std::string>& stage_group_values();
const std::vector<std::string>& grade_values();
const std::vector<std::string>& biomarker_values();  // positive, negative, unknown

struct PhenotypeRecord {
    std::optional<std::string> t_stage;
    std::optional<std::string> n_stage;
    std::optional<std::string> m_stage;
    std::optional<std::string> stage_group;
    std::optional<double> tumor_size_cm;  // sanity bound: < 50
    std::optional<std::string> grade;
    std::optional<int> ecog;       // 0..5
    std::optional<int> karnofsky;  // 0..100, multiple of 10
    std::string er = "unknown";
    std::string pr = "unknown";
    std::string her2 = "unknown";

    bool operator==(const PhenotypeRecord&) const = default;
};

struct OutcomeRecord {
    struct Progression {
        bool progressed = false;
        bool discontinued = false;
        std::string details;
        bool operator==(const Progression&) const = default;
    } progression;

    struct Toxicity {
        bool adverse_effects = false;
        bool qol_deterioration = false;
        bool discontinued_or_modified = false;
        std::string details;
        bool operator==(const Toxicity&) const = default;
    } toxicity;

    struct DeathHospice {
        bool died = false;
        bool hospice = false;
        std::optional<std::string> event_date;  // ISO-8601; requires died or hospice
        std::string details;
        bool operator==(const DeathHospice&) const = default;
    } death_hospice;

    bool operator==(const OutcomeRecord&) const = default;
};

using Record = std::variant<PhenotypeRecord, OutcomeRecord>;

struct Violation {
    std::string field;
    std::string reason;
};

// Outcome of parse_and_validate. valid_json=false corresponds to NoJsonFound /
// unparseable text; schema_ok=false carries SchemaViolation entries.
struct ParseResult {
    std::optional<Record> record;
    bool valid_json = false;
    bool schema_ok = false;
    std::vector<Violation> violations;
};

// Extracts the first JSON object from raw text (tolerating code fences and
// preamble), then validates required keys, types, enum membership, and value
// bounds. Unknown keys are rejected.
ParseResult parse_and_validate(std::string_view raw, std::string_view schema_id);

nlohmann::json record_to_json(const Record& record);
nlohmann::json phenotype_to_json(const PhenotypeRecord& r);
nlohmann::json outcome_to_json(const OutcomeRecord& r);

// Compact schema description included in prompts.
std::string schema_text(Target t);

// All-null / all-false records (the fail-safe shape).
PhenotypeRecord empty_phenotype();
OutcomeRecord empty_outcome();
Record empty_record(Target t);

}  // namespace oncosurv::extraction
