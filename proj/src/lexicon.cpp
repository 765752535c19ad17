#include "oncosurv/lexicon.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <regex>

#include "oncosurv/errors.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::extraction {

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto s = util::trim(cur);
        if (!s.empty()) out.emplace_back(s);
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        bool boundary = c == '!' || c == '?' || c == ';' || c == '\n';
        if (c == '.') {
            bool decimal = i > 0 && i + 1 < text.size() &&
                           std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
                           std::isdigit(static_cast<unsigned char>(text[i + 1]));
            boundary = !decimal;
        }
        if (boundary) flush();
        else cur.push_back(c);
    }
    flush();
    return out;
}

bool sentence_negated(const std::string& sentence, std::size_t match_pos) {
    static const std::vector<std::string> cues = {
        "no", "not", "denies", "denied", "without", "never", "negative for", "free of", "ruled out", "rules out",
    };
    if (match_pos > sentence.size()) match_pos = sentence.size();
    std::string prefix = util::to_lower(sentence.substr(0, match_pos));
    for (const auto& cue : cues) {
        std::size_t pos = 0;
        while ((pos = prefix.find(cue, pos)) != std::string::npos) {
            bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(prefix[pos - 1]));
            std::size_t end = pos + cue.size();
            bool right = end >= prefix.size() || !std::isalnum(static_cast<unsigned char>(prefix[end]));
            if (left && right) return true;
            ++pos;
        }
    }
    return false;
}

namespace {

using Norm = std::optional<std::string> (*)(const std::smatch&);

std::optional<std::string> norm_true(const std::smatch&) { return "true"; }

std::optional<std::string> norm_t_stage(const std::smatch& m) { return "T" + m[1].str(); }
std::optional<std::string> norm_n_stage(const std::smatch& m) { return "N" + m[1].str(); }
std::optional<std::string> norm_m_stage(const std::smatch& m) { return "M" + m[1].str(); }

std::optional<std::string> norm_upper(const std::smatch& m) {
    std::string s = m[1].str();
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::optional<std::string> norm_size_cm(const std::smatch& m) {
    double v = std::strtod(m[1].str().c_str(), nullptr);
    if (!std::isfinite(v) || v < 0.0 || v >= 50.0) return std::nullopt;
    return util::format_double(v);
}

std::optional<std::string> norm_grade(const std::smatch& m) { return "G" + m[1].str(); }

std::optional<std::string> norm_digit(const std::smatch& m) { return m[1].str(); }

std::optional<std::string> norm_karnofsky(const std::smatch& m) {
    int v = std::atoi(m[1].str().c_str());
    if (v < 0 || v > 100 || v % 10 != 0) return std::nullopt;
    return std::to_string(v);
}

std::optional<std::string> norm_polarity(const std::smatch& m) {
    std::string s = util::to_lower(m[1].str());
    if (s == "pos") return "positive";
    if (s == "neg") return "negative";
    return s;
}

std::optional<std::string> norm_date(const std::smatch& m) {
    if (!util::parse_date(m[1].str())) return std::nullopt;
    return m[1].str();
}

}  // namespace

struct Lexicon::Impl {
    struct FieldPattern {
        std::string field;
        std::regex pattern;
        std::optional<std::regex> also;  // sentence must also match this
        bool negatable = false;
        Norm normalize = norm_true;
    };

    std::vector<FieldPattern> patterns;
    std::vector<std::string> names;

    const FieldPattern* find(const std::string& field) const {
        for (const auto& p : patterns)
            if (p.field == field) return &p;
        return nullptr;
    }
};

Lexicon::Lexicon() : impl_(std::make_unique<Impl>()) {
    auto cs = std::regex::optimize;
    auto ci = std::regex::optimize | std::regex::icase;
    auto add = [&](std::string field, std::regex pattern, std::optional<std::regex> also, bool negatable, Norm norm) {
        impl_->patterns.push_back({std::move(field), std::move(pattern), std::move(also), negatable, norm});
        impl_->names.push_back(impl_->patterns.back().field);
    };

    add("t_stage", std::regex(R"(\b[cp]?T(is|X|[0-4])\b)", cs), std::nullopt, false, norm_t_stage);
    add("n_stage", std::regex(R"(\b[cp]?N(X|[0-3])\b)", cs), std::nullopt, false, norm_n_stage);
    add("m_stage", std::regex(R"(\b[cp]?M(X|[01])\b)", cs), std::nullopt, false, norm_m_stage);
    add("stage_group",
        std::regex(R"([Ss]tage(?:\s+[Gg]roup)?[\s:]+(IIIC|IIIB|IIIA|III|IIB|IIA|IV|II|IB|IA|I|0)\b)", cs),
        std::nullopt, false, norm_upper);
    add("tumor_size_cm", std::regex(R"((\d+(?:\.\d+)?)\s*cm\b)", ci),
        std::regex(R"(tumou?r|mass|lesion|nodule|measur|size)", ci), false, norm_size_cm);
    add("grade", std::regex(R"(\b(?:[Gg]rade[\s:]*|G)([1-4])\b)", cs), std::nullopt, false, norm_grade);
    add("ecog", std::regex(R"(\bECOG\b[^\d]{0,30}([0-5])\b)", ci), std::nullopt, false, norm_digit);
    add("karnofsky", std::regex(R"(\b(?:Karnofsky|KPS)\b[^\d]{0,30}(\d{1,3})\b)", ci), std::nullopt, false,
        norm_karnofsky);
    add("er", std::regex(R"(\b(?:ER|estrogen\s+receptor)(?:\s+status)?[\s:\-]+(positive|negative|pos|neg)\b)", ci),
        std::nullopt, false, norm_polarity);
    add("pr",
        std::regex(R"(\b(?:PR|progesterone\s+receptor)(?:\s+status)?[\s:\-]+(positive|negative|pos|neg)\b)", ci),
        std::nullopt, false, norm_polarity);
    add("her2", std::regex(R"(\bHER2(?:/neu)?(?:\s+status)?[\s:\-]+(positive|negative|pos|neg)\b)", ci),
        std::nullopt, false, norm_polarity);

    add("progression.progressed",
        std::regex(R"(\bprogress(?:ion|ed|ing|ive)\b(?!-free)|\bnew\s+metastas\w+\b|\benlarging\b)", ci),
        std::nullopt, true, norm_true);
    add("progression.discontinued", std::regex(R"(\b(?:discontinu\w+|stopped|halted|ceased)\b)", ci), std::nullopt,
        true, norm_true);
    add("toxicity.adverse_effects",
        std::regex(
            R"(\b(?:nausea|vomiting|neuropathy|neutropenia|fatigue|diarrhea|mucositis|rash|anemia|thrombocytopenia|toxicity|adverse\s+(?:effect|event|reaction)s?)\b)",
            ci),
        std::nullopt, true, norm_true);
    add("toxicity.qol_deterioration", std::regex(R"(\b(?:declin\w*|deteriorat\w*|worsen\w*)\b)", ci),
        std::regex(R"(\bquality\s+of\s+life\b|\bQOL\b)", ci), true, norm_true);
    add("toxicity.discontinued_or_modified",
        std::regex(
            R"(\b(?:discontinu\w+|stopped|halted|ceased|held|interrupt\w+|dose\s+(?:was\s+)?reduc\w+|modif\w+|switch\w+)\b)",
            ci),
        std::nullopt, true, norm_true);
    add("death_hospice.died", std::regex(R"(\b(?:died|death|passed\s+away|deceased|expired)\b)", ci), std::nullopt,
        true, norm_true);
    add("death_hospice.hospice", std::regex(R"(\b(?:hospice|comfort\s+care)\b)", ci), std::nullopt, true, norm_true);
    add("death_hospice.event_date", std::regex(R"(\b(\d{4}-\d{2}-\d{2})\b)", cs),
        std::regex(R"(\b(?:died|death|passed\s+away|deceased|expired|hospice|comfort\s+care)\b)", ci), false,
        norm_date);
}

Lexicon::~Lexicon() = default;

const Lexicon& Lexicon::instance() {
    static const Lexicon lex;
    return lex;
}

const std::vector<std::string>& Lexicon::fields() const { return impl_->names; }

bool Lexicon::has_field(const std::string& field) const { return impl_->find(field) != nullptr; }

std::vector<Evidence> Lexicon::find_values(const std::string& field, const std::string& text) const {
    const auto* fp = impl_->find(field);
    if (!fp) throw Error(ErrorKind::internal, "UnknownField: lexicon has no entry for '" + field + "'");
    std::vector<Evidence> out;
    for (const auto& sentence : split_sentences(text)) {
        if (fp->also && !std::regex_search(sentence, *fp->also)) continue;
        auto begin = std::sregex_iterator(sentence.begin(), sentence.end(), fp->pattern);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            auto value = fp->normalize(*it);
            if (!value) continue;
            Evidence ev;
            ev.field = field;
            ev.value = std::move(*value);
            ev.sentence = sentence;
            ev.negated = fp->negatable && sentence_negated(sentence, static_cast<std::size_t>(it->position(0)));
            out.push_back(std::move(ev));
        }
    }
    return out;
}

bool Lexicon::supports(const std::string& field, const std::string& value, const std::string& text) const {
    for (const auto& ev : find_values(field, text))
        if (!ev.negated && ev.value == value) return true;
    return false;
}

std::optional<Evidence> Lexicon::first_evidence(const std::string& field,
                                                const std::vector<std::string>& texts) const {
    for (const auto& text : texts)
        for (auto& ev : find_values(field, text))
            if (!ev.negated) return ev;
    return std::nullopt;
}

}  // namespace oncosurv::extraction
